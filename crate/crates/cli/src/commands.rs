//! Subcommand implementations. Each writes its files into the output
//! directory and returns a short human-readable report.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cruise_core::experiment::{run_campaign, run_campaign_logged, CampaignResult, Scenario};
use cruise_core::fluid::{conservation_error, FluidModel, FluidState, FluidTrajectory};
use cruise_core::network::RoadNetwork;
use cruise_core::planner::{best_path_beam, best_path_exhaustive, BeamWidth, PlanOptions};
use cruise_core::{sample_initial_state, StrategyKind};
use log::info;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Placement, RunConfig};
use crate::output::{write_summary, write_trials, SUMMARY_FILE, TRIALS_FILE};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const NETWORK_FILE: &str = "network.json";
pub const DEMAND_FILE: &str = "demand.json";
pub const PLAN_FILE: &str = "plan.json";
pub const SURVIVAL_FILE: &str = "survival.csv";
pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Creates the output directory and echoes the resolved config into it.
fn prepare_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_text(&dir.join(RESOLVED_CONFIG_FILE), &cfg.to_toml())?;
    Ok(dir)
}

/// Initial fluid state of `cfg.fluid.drivers` idle drivers.
pub fn initial_state(cfg: &RunConfig, net: &RoadNetwork) -> FluidState {
    let n = cfg.fluid.drivers;
    match cfg.fluid.placement {
        Placement::Edges => {
            let mut s = FluidState::zeros(net.edge_count(), net.node_count());
            let share = n as f64 / net.edge_count() as f64;
            s.idle_on_edge.iter_mut().for_each(|d| *d = share);
            s
        }
        Placement::Nodes => {
            FluidState::idle_at_nodes(net, &sample_initial_state(net, n, cfg.fluid.placement_seed))
        }
    }
}

fn integrate(cfg: &RunConfig, net: &RoadNetwork, horizon: f64) -> Result<FluidTrajectory, CliError> {
    let profile = cfg.build_profile(net)?;
    let model = FluidModel::new(net, &profile, cfg.fluid_settings()).map_err(runtime)?;
    model
        .integrate(&initial_state(cfg, net), horizon)
        .map_err(runtime)
}

/// Checks the config and returns the resolved document.
pub fn cmd_validate(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.validate()?;
    Ok(cfg.to_toml())
}

/// Integrates the fluid model and writes the trajectory dumps.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let net = cfg.build_network()?;
    let profile = cfg.build_profile(&net)?;
    let dir = prepare_output(cfg)?;
    let traj = integrate(cfg, &net, cfg.fluid.horizon)?;
    info!("integrated {} steps", traj.steps());

    let path = dir.join(TRAJECTORY_FILE);
    traj.write_columnar(create(&path)?, cfg.output.trajectory_stride)
        .map_err(csv_err(&path))?;
    let path = dir.join(AGGREGATE_FILE);
    traj.write_aggregate(create(&path)?).map_err(csv_err(&path))?;
    write_text(&dir.join(NETWORK_FILE), &net.to_json())?;
    write_text(&dir.join(DEMAND_FILE), &profile.to_json())?;

    let drivers = cfg.fluid.drivers as f64;
    let last = traj.totals(traj.steps() - 1);
    let mut report = String::new();
    writeln!(report, "steps: {}", traj.steps()).ok();
    writeln!(report, "drivers: {drivers}").ok();
    writeln!(
        report,
        "conservation error: {:.3e}",
        conservation_error(&traj, drivers)
    )
    .ok();
    writeln!(
        report,
        "final: idle on edges {:.3}, idle at nodes {:.3}, occupied {:.3}",
        last.idle_on_edges, last.idle_at_nodes, last.occupied
    )
    .ok();
    writeln!(report, "wrote {}", dir.display()).ok();
    Ok(report)
}

#[derive(Debug, Serialize)]
struct PlanReport {
    start_node: usize,
    request_time: f64,
    method: String,
    edges: Vec<usize>,
    nodes: Vec<usize>,
    expected_allocation_time: f64,
    terminal_survival: f64,
    travel_time: f64,
}

/// One WGC query against a forecast from the configured initial state.
pub fn cmd_plan(cfg: &RunConfig) -> Result<String, CliError> {
    let net = cfg.build_network()?;
    let dir = prepare_output(cfg)?;
    let p = &cfg.planner;
    let dt = cfg.fluid.dt;
    let offset_steps = (p.request_time / dt).round() as usize;
    let horizon = offset_steps as f64 * dt + cfg.wgc_params().forecast_horizon(&net);
    let traj = integrate(cfg, &net, horizon)?;
    let opts = PlanOptions {
        eps: p.eps,
        offset_steps,
        keep_curve: p.survival_curve,
    };
    let eval = match p.beam() {
        BeamWidth::Unbounded => best_path_exhaustive(&net, p.start_node, p.max_edges, &traj, opts),
        width => best_path_beam(&net, p.start_node, p.max_edges, &traj, opts, width),
    }
    .map_err(runtime)?;

    let report = PlanReport {
        start_node: p.start_node,
        request_time: offset_steps as f64 * dt,
        method: match p.beam() {
            BeamWidth::Unbounded => "exhaustive".into(),
            BeamWidth::Limited(k) => format!("beam({k})"),
        },
        edges: eval.path.edges().to_vec(),
        nodes: eval.path.nodes(&net),
        expected_allocation_time: eval.expected_time,
        terminal_survival: eval.terminal_survival,
        travel_time: eval.travel_time,
    };
    let json = serde_json::to_string_pretty(&report).map_err(runtime)?;
    write_text(&dir.join(PLAN_FILE), &json)?;
    if let Some(curve) = &eval.survival_curve {
        let path = dir.join(SURVIVAL_FILE);
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["step", "time", "survival"])
            .map_err(csv_err(&path))?;
        for (k, s) in curve.iter().enumerate() {
            w.write_record([k.to_string(), (k as f64 * dt).to_string(), s.to_string()])
                .map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(json + "\n")
}

fn append_events(
    w: &mut impl Write,
    result: &CampaignResult,
    logs: &[Vec<cruise_core::experiment::WorldEvent>],
) -> serde_json::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        fleet_size: usize,
        strategy: &'a str,
        trial: usize,
        #[serde(flatten)]
        event: &'a cruise_core::experiment::WorldEvent,
    }
    for (rec, log) in result.records.iter().zip(logs) {
        for event in log {
            serde_json::to_writer(
                &mut *w,
                &Line {
                    fleet_size: rec.fleet_size,
                    strategy: rec.strategy.key(),
                    trial: rec.trial,
                    event,
                },
            )?;
            w.write_all(b"\n").map_err(serde_json::Error::io)?;
        }
    }
    Ok(())
}

/// Runs the paired campaign one fleet size at a time, flushing results after
/// each size.
pub fn cmd_campaign(cfg: &RunConfig) -> Result<String, CliError> {
    let net = cfg.build_network()?;
    let profile = cfg.build_profile(&net)?;
    let scenario = Scenario::new(net, profile, cfg.fluid.dt).map_err(runtime)?;
    let dir = prepare_output(cfg)?;
    let full = cfg.campaign_config();
    let strategies = full.strategies.clone();

    let summary_path = dir.join(SUMMARY_FILE);
    let trials_path = dir.join(TRIALS_FILE);
    let events_path = dir.join(EVENTS_FILE);
    let mut summary = csv::Writer::from_writer(create(&summary_path)?);
    let mut trials = csv::Writer::from_writer(create(&trials_path)?);
    let mut events = if cfg.output.event_logs {
        Some(create(&events_path)?)
    } else {
        None
    };
    let mut header: Vec<String> = vec!["fleet_size".into(), "metric".into()];
    header.extend(strategies.iter().map(|s| s.label().to_string()));
    summary.write_record(&header).map_err(csv_err(&summary_path))?;
    trials
        .write_record(crate::output::TRIALS_HEADER)
        .map_err(csv_err(&trials_path))?;

    let mut report = String::new();
    for &n in &full.fleet_sizes {
        let part = cruise_core::CampaignConfig {
            fleet_sizes: vec![n],
            ..full.clone()
        };
        let result = match events.as_mut() {
            Some(w) => {
                let (result, logs) = run_campaign_logged(&scenario, &part).map_err(runtime)?;
                append_events(w, &result, &logs).map_err(runtime)?;
                w.flush().map_err(io_err(&events_path))?;
                result
            }
            None => run_campaign(&scenario, &part).map_err(runtime)?,
        };
        write_summary(&mut summary, &result, n).map_err(csv_err(&summary_path))?;
        write_trials(&mut trials, &result).map_err(csv_err(&trials_path))?;
        summary.flush().map_err(io_err(&summary_path))?;
        trials.flush().map_err(io_err(&trials_path))?;
        info!("fleet size {n}: {} trials written", result.records.len());
        describe(&mut report, &result, n);
    }
    writeln!(report, "wrote {}", dir.display()).ok();
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}"))
}

fn describe(report: &mut String, result: &CampaignResult, n: usize) {
    let strategies = &result.config.strategies;
    writeln!(report, "fleet size {n}").ok();
    write!(report, "  {:<9}", "metric").ok();
    for s in strategies {
        write!(report, "{:>10}", s.label()).ok();
    }
    writeln!(report).ok();
    let cells: Vec<_> = strategies.iter().map(|&s| result.summary(s, n)).collect();
    for (name, pick) in [
        (
            "mean",
            &(|c: &cruise_core::CellSummary| fmt_opt(c.mean)) as &dyn Fn(&cruise_core::CellSummary) -> String,
        ),
        ("worst", &|c| fmt_opt(c.worst)),
        ("censored", &|c| c.censored.to_string()),
    ] {
        write!(report, "  {name:<9}").ok();
        for c in &cells {
            write!(report, "{:>10}", pick(c)).ok();
        }
        writeln!(report).ok();
    }
    if strategies.contains(&StrategyKind::Wgc) {
        for &b in strategies.iter().filter(|&&s| s != StrategyKind::Wgc) {
            let t = result.compare(StrategyKind::Wgc, b, n);
            writeln!(
                report,
                "  WGC vs {:<8} wins {:>3} losses {:>3} ties {:>3} sign-test p = {:.4}",
                b.label(),
                t.wins,
                t.losses,
                t.ties,
                t.p_value
            )
            .ok();
        }
    }
}
