//! Run configuration: a TOML document with one table per concern. Every key
//! is optional; missing keys take the defaults below and unknown keys are
//! rejected.

use std::path::PathBuf;

use cruise_core::fluid::{delay_steps, FluidSettings, Prehistory};
use cruise_core::network::{build_grid, PopularityWeights, RoadNetwork};
use cruise_core::planner::BeamWidth;
use cruise_core::{
    sample_profile, CampaignConfig, DemandParams, DemandProfile, Sinusoid, StrategyKind, WgcParams,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid config value: {0}")]
    Value(String),
    #[error("config constraint violated for `{key}`: {message}")]
    Constraint { key: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn violation(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub network: NetworkSection,
    pub demand: DemandSection,
    pub fluid: FluidSection,
    pub planner: PlannerSection,
    pub campaign: CampaignSection,
    pub output: OutputSection,
}

/// A transition probability replacing the uniform default for one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub tail: usize,
    pub head: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    pub rows: usize,
    pub cols: usize,
    /// Travel time of every edge, seconds.
    pub tau_default: f64,
    /// Draw per-node destination weights from this seed instead of uniform.
    pub popularity_seed: Option<u64>,
    pub popularity_weights: Option<Vec<f64>>,
    /// Node ids are `row * cols + col`.
    pub transition_override: Vec<TransitionEntry>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            rows: 10,
            cols: 10,
            tau_default: 10.0,
            popularity_seed: None,
            popularity_weights: None,
            transition_override: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandSection {
    pub hotspot_fraction: f64,
    pub cold_fraction: f64,
    pub base_range: [f64; 2],
    pub hotspot_rate: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
    pub per_edge_phase: bool,
    /// Passenger abandonment rate, 1/s.
    pub mu: f64,
    pub seed: u64,
}

impl Default for DemandSection {
    fn default() -> Self {
        let p = DemandParams::default();
        DemandSection {
            hotspot_fraction: p.hotspot_fraction,
            cold_fraction: p.cold_fraction,
            base_range: [p.base_range.0, p.base_range.1],
            hotspot_rate: p.hotspot_rate,
            amplitude: p.sinusoid.amplitude,
            period: p.sinusoid.period,
            phase: p.sinusoid.phase,
            per_edge_phase: p.per_edge_phase,
            mu: p.abandonment_rate,
            seed: 1,
        }
    }
}

impl DemandSection {
    pub fn params(&self) -> DemandParams {
        DemandParams {
            hotspot_fraction: self.hotspot_fraction,
            cold_fraction: self.cold_fraction,
            base_range: (self.base_range[0], self.base_range[1]),
            hotspot_rate: self.hotspot_rate,
            sinusoid: Sinusoid {
                amplitude: self.amplitude,
                period: self.period,
                phase: self.phase,
            },
            per_edge_phase: self.per_edge_phase,
            abandonment_rate: self.mu,
        }
    }
}

/// Where the fleet sits at `t = 0` in `simulate` and `plan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Idle and spread evenly over the edges.
    Edges,
    /// Idle at nodes, multinomial over nodes.
    Nodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluidSection {
    pub dt: f64,
    pub horizon: f64,
    pub eps_d: f64,
    pub prehistory: Prehistory,
    /// Fleet size for `simulate` and `plan`.
    pub drivers: usize,
    pub placement: Placement,
    pub placement_seed: u64,
}

impl Default for FluidSection {
    fn default() -> Self {
        FluidSection {
            dt: 0.1,
            horizon: 600.0,
            eps_d: cruise_core::fluid::DEFAULT_EPS_D,
            prehistory: Prehistory::default(),
            drivers: 1000,
            placement: Placement::Edges,
            placement_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSection {
    pub max_edges: usize,
    pub beam_width: usize,
    /// Ignore `beam_width` and enumerate every path.
    pub exhaustive: bool,
    pub eps: f64,
    /// Forecast length; defaults to `max_edges * tau_max`.
    pub horizon: Option<f64>,
    pub start_node: usize,
    pub request_time: f64,
    pub survival_curve: bool,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            max_edges: 4,
            beam_width: 10,
            exhaustive: false,
            eps: cruise_core::planner::DEFAULT_EPS,
            horizon: None,
            start_node: 0,
            request_time: 0.0,
            survival_curve: false,
        }
    }
}

impl PlannerSection {
    pub fn beam(&self) -> BeamWidth {
        if self.exhaustive {
            BeamWidth::Unbounded
        } else {
            BeamWidth::Limited(self.beam_width)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSection {
    pub fleet_sizes: Vec<usize>,
    pub trials: usize,
    pub strategies: Vec<StrategyKind>,
    pub base_seed: u64,
    /// Worker threads; all available cores when absent.
    pub jobs: Option<usize>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        CampaignSection {
            fleet_sizes: vec![100, 500, 1000, 2000, 4000, 5000],
            trials: 100,
            strategies: StrategyKind::ALL.to_vec(),
            base_seed: 1,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write every n-th step of the columnar trajectory dump.
    pub trajectory_stride: usize,
    pub event_logs: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            trajectory_stride: 1,
            event_logs: false,
        }
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut unknown = Vec::new();
    let cfg: RunConfig =
        serde_ignored::deserialize(de, |path| unknown.push(path.to_string())).map_err(|e| {
            let msg = e.to_string();
            match msg.find("unknown field `") {
                Some(i) => ConfigError::UnknownKey(msg[i + 15..].split('`').next().unwrap_or("").to_string()),
                None => ConfigError::Value(msg),
            }
        })?;
    if let Some(key) = unknown.into_iter().next() {
        return Err(ConfigError::UnknownKey(key));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&std::path::Path>) -> Result<RunConfig, ConfigError> {
    match path {
        None => {
            let cfg = RunConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config(&text)
        }
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(violation(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Cross-field checks, run before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.network;
        if n.rows < 2 || n.cols < 2 {
            return Err(violation(
                "network.rows",
                format!("grid needs at least 2x2, got {}x{}", n.rows, n.cols),
            ));
        }
        positive("network.tau_default", n.tau_default)?;
        if n.popularity_seed.is_some() && n.popularity_weights.is_some() {
            return Err(violation(
                "network.popularity_weights",
                "conflicts with network.popularity_seed",
            ));
        }

        let f = &self.fluid;
        positive("fluid.dt", f.dt)?;
        positive("fluid.horizon", f.horizon)?;
        if !(f.eps_d.is_finite() && f.eps_d >= 0.0) {
            return Err(violation("fluid.eps_d", "must be non-negative"));
        }
        if delay_steps(n.tau_default, f.dt).is_err() {
            return Err(violation(
                "fluid.dt",
                format!(
                    "tau_default {} is not an integer multiple of dt {}",
                    n.tau_default, f.dt
                ),
            ));
        }
        if f.drivers == 0 {
            return Err(violation("fluid.drivers", "must be at least 1"));
        }

        let d = &self.demand;
        let fractions_ok = d.hotspot_fraction >= 0.0
            && d.cold_fraction >= 0.0
            && d.hotspot_fraction + d.cold_fraction <= 1.0;
        if !fractions_ok {
            return Err(violation(
                "demand.hotspot_fraction",
                "fractions must be non-negative and sum to at most 1",
            ));
        }
        positive("demand.mu", d.mu)?;

        let p = &self.planner;
        if p.max_edges == 0 {
            return Err(violation("planner.max_edges", "must be at least 1"));
        }
        if p.beam_width == 0 {
            return Err(violation("planner.beam_width", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&p.eps) {
            return Err(violation("planner.eps", "must lie in [0, 1)"));
        }
        if let Some(h) = p.horizon {
            positive("planner.horizon", h)?;
        }
        if p.start_node >= n.rows * n.cols {
            return Err(violation(
                "planner.start_node",
                format!("node {} is outside the grid", p.start_node),
            ));
        }
        if !(p.request_time.is_finite() && p.request_time >= 0.0) {
            return Err(violation("planner.request_time", "must be non-negative"));
        }

        let c = &self.campaign;
        if c.fleet_sizes.is_empty() || c.fleet_sizes.contains(&0) {
            return Err(violation(
                "campaign.fleet_sizes",
                "need at least one fleet size, each at least 1",
            ));
        }
        if c.trials == 0 {
            return Err(violation("campaign.trials", "must be at least 1"));
        }
        if c.strategies.is_empty() {
            return Err(violation("campaign.strategies", "need at least one strategy"));
        }
        let mut seen = c.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != c.strategies.len() {
            return Err(violation("campaign.strategies", "strategies must be distinct"));
        }
        if c.jobs == Some(0) {
            return Err(violation("campaign.jobs", "must be at least 1"));
        }
        if self.output.trajectory_stride == 0 {
            return Err(violation("output.trajectory_stride", "must be at least 1"));
        }

        // Checks that need the built objects.
        let net = self.build_network()?;
        self.build_profile(&net)?;
        Ok(())
    }

    pub fn build_network(&self) -> Result<RoadNetwork, ConfigError> {
        let n = &self.network;
        let mut net =
            build_grid(n.rows, n.cols, n.tau_default).map_err(|e| violation("network", e.to_string()))?;
        if !n.transition_override.is_empty() {
            let entries: Vec<(usize, usize, f64)> = n
                .transition_override
                .iter()
                .map(|t| (t.tail, t.head, t.p))
                .collect();
            net = net
                .with_transition_override(&entries)
                .map_err(|e| violation("network.transition_override", e.to_string()))?;
        }
        let popularity = match (&n.popularity_seed, &n.popularity_weights) {
            (Some(seed), _) => Some(PopularityWeights::Random { seed: *seed }),
            (_, Some(w)) => Some(PopularityWeights::Explicit(w.clone())),
            _ => None,
        };
        if let Some(p) = popularity {
            net = net
                .with_popularity(&p)
                .map_err(|e| violation("network.popularity_weights", e.to_string()))?;
        }
        Ok(net)
    }

    pub fn build_profile(&self, net: &RoadNetwork) -> Result<DemandProfile, ConfigError> {
        sample_profile(net, &self.demand.params(), self.demand.seed)
            .map_err(|e| violation("demand", e.to_string()))
    }

    pub fn fluid_settings(&self) -> FluidSettings {
        FluidSettings {
            eps_d: self.fluid.eps_d,
            prehistory: self.fluid.prehistory,
            ..FluidSettings::new(self.fluid.dt)
        }
    }

    pub fn wgc_params(&self) -> WgcParams {
        WgcParams {
            max_edges: self.planner.max_edges,
            beam: self.planner.beam(),
            eps: self.planner.eps,
            dt: self.fluid.dt,
            horizon: self.planner.horizon,
        }
    }

    pub fn campaign_config(&self) -> CampaignConfig {
        CampaignConfig {
            fleet_sizes: self.campaign.fleet_sizes.clone(),
            trials: self.campaign.trials,
            strategies: self.campaign.strategies.clone(),
            base_seed: self.campaign.base_seed,
            horizon: self.fluid.horizon,
            wgc: self.wgc_params(),
        }
    }

    /// The resolved config as a TOML document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.network.rows, cfg.network.cols), (10, 10));
        assert_eq!(cfg.fluid.horizon, 600.0);
        assert_eq!(cfg.fluid.dt, 0.1);
        assert_eq!(cfg.demand.mu, 0.1);
        assert_eq!(
            (cfg.planner.max_edges, cfg.planner.beam_width, cfg.planner.eps),
            (4, 10, 1e-4)
        );
    }

    #[test]
    fn error_classes() {
        assert!(matches!(
            parse_config("[fluid\ndt = 1"),
            Err(ConfigError::Syntax(_))
        ));
        match parse_config("[planner]\nbeam_widht = 3\n") {
            Err(ConfigError::UnknownKey(k)) => assert_eq!(k, "planner.beam_widht"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("colour = 1"), Err(ConfigError::UnknownKey(k)) if k == "colour"));
        match parse_config("[network]\ntau_default = 1.0\n[fluid]\ndt = 0.3\n") {
            Err(ConfigError::Constraint { key, .. }) => assert_eq!(key, "fluid.dt"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("[fluid]\ndt = \"fast\""),
            Err(ConfigError::Value(_))
        ));
        assert!(matches!(
            parse_config("[campaign]\nstrategies = [\"wgc\", \"mdm\"]"),
            Err(ConfigError::Value(_))
        ));
    }

    #[test]
    fn fleet_sizes_restrict_campaign() {
        let cfg = parse_config("[campaign]\nfleet_sizes = [100, 500]\n").unwrap();
        assert_eq!(cfg.campaign_config().fleet_sizes, vec![100, 500]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse_config(
            "[network]\nrows = 3\ncols = 4\npopularity_seed = 9\n[[network.transition_override]]\ntail = 0\nhead = 1\np = 1.0\n[[network.transition_override]]\ntail = 0\nhead = 4\np = 0.0\n[planner]\nhorizon = 50.0\n",
        )
        .unwrap();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(
            parse_config(&RunConfig::default().to_toml()).unwrap(),
            RunConfig::default()
        );
    }
}
