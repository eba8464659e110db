use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cruise_cli::{cmd_campaign, cmd_plan, cmd_simulate, cmd_validate, load_config, CliError};

#[derive(Parser)]
#[command(
    name = "cruise",
    version,
    about = "Idle-driver repositioning simulator and planner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding `campaign.base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, overriding `campaign.jobs`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate the fluid model and dump the trajectory.
    Simulate,
    /// Compute one WGC route from `planner.start_node`.
    Plan,
    /// Run the paired strategy comparison.
    Campaign,
    /// Check the configuration and print it with defaults filled in.
    Validate,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        cfg.output.directory = out;
    }
    if let Some(seed) = cli.seed {
        cfg.campaign.base_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.campaign.jobs = Some(jobs);
    }
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cfg.campaign.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Plan => cmd_plan(&cfg),
        Command::Campaign => cmd_campaign(&cfg),
        Command::Validate => cmd_validate(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
