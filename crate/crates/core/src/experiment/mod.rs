//! Monte Carlo comparison of cruising strategies in an agent-level world.
//!
//! Each trial builds a world from `(base_seed, fleet_size, trial)` alone, so
//! every strategy faces the same passenger arrivals, background fleet
//! placement and tagged start node. Only the tagged driver's routing differs.

mod seeds;
mod stats;
mod world;

pub use seeds::{derive_seed, world_seed, Stream};
pub use stats::{ks_critical_1pct, ks_statistic, sign_test, SignTest};
pub use world::{AgentWorld, Census, DriverStatus, PassengerCounts, Scenario, TaggedPolicy, WorldEvent};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ExperimentError;
use crate::network::{NodeId, RoadNetwork};
use crate::strategies::{StrategyKind, WgcParams};

/// Multinomial placement of `drivers` over the nodes with uniform
/// probabilities.
pub fn sample_initial_state(net: &RoadNetwork, drivers: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; net.node_count()];
    for _ in 0..drivers {
        counts[rng.random_range(0..net.node_count())] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Drivers in the world, the tagged driver included.
    pub fleet_size: usize,
    pub horizon: f64,
    pub base_seed: u64,
    pub trial: usize,
    pub wgc: WgcParams,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.fleet_size == 0 {
            return Err(ExperimentError::Config("fleet size must be at least 1".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ExperimentError::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.wgc.max_edges == 0 {
            return Err(ExperimentError::Config(
                "planner max_edges must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub strategy: StrategyKind,
    pub fleet_size: usize,
    pub trial: usize,
    pub start_node: NodeId,
    /// `None` when the tagged driver was still unallocated at the horizon.
    pub allocation_time: Option<f64>,
    pub decisions: usize,
    pub plans: usize,
}

/// Builds the paired world of `cfg` with the tagged driver following
/// `strategy`.
pub fn build_world<'a>(
    scenario: &'a Scenario,
    cfg: &TrialConfig,
    strategy: StrategyKind,
) -> Result<(AgentWorld<'a>, NodeId), ExperimentError> {
    cfg.validate()?;
    let net = scenario.network();
    let seed = world_seed(cfg.base_seed, cfg.fleet_size, cfg.trial);
    let background = cfg.fleet_size - 1;
    let counts = sample_initial_state(net, background, derive_seed(seed, &[Stream::Placement as u64]));
    let mut setup = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[Stream::TaggedSetup as u64]));
    let start = setup.random_range(0..net.node_count());
    let rank = setup.random_range(0..=background);

    let mut world = AgentWorld::new(scenario, cfg.horizon, seed)?;
    for (node, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            world.add_background_at_node(node)?;
        }
    }
    world.add_tagged(
        start,
        rank,
        TaggedPolicy {
            strategy,
            wgc: cfg.wgc,
        },
    )?;
    Ok((world, start))
}

fn record(world: &AgentWorld<'_>, cfg: &TrialConfig, strategy: StrategyKind, start: NodeId) -> TrialRecord {
    let (decisions, plans) = world.tagged_decisions();
    TrialRecord {
        strategy,
        fleet_size: cfg.fleet_size,
        trial: cfg.trial,
        start_node: start,
        allocation_time: world.allocation_time(),
        decisions,
        plans,
    }
}

/// Realized allocation time of the tagged driver in one paired world.
pub fn run_trial(
    scenario: &Scenario,
    cfg: &TrialConfig,
    strategy: StrategyKind,
) -> Result<TrialRecord, ExperimentError> {
    let (mut world, start) = build_world(scenario, cfg, strategy)?;
    world.run()?;
    Ok(record(&world, cfg, strategy, start))
}

/// As [`run_trial`], also returning the world's event log.
pub fn run_trial_logged(
    scenario: &Scenario,
    cfg: &TrialConfig,
    strategy: StrategyKind,
) -> Result<(TrialRecord, Vec<WorldEvent>), ExperimentError> {
    let (mut world, start) = build_world(scenario, cfg, strategy)?;
    world.record_events();
    world.run()?;
    let rec = record(&world, cfg, strategy, start);
    Ok((rec, world.take_events().unwrap_or_default()))
}

/// Runs a world of `drivers` background drivers and no tagged driver to the
/// horizon, returning the idle-on-edge counts at every `stride`-th step.
pub fn simulate_background(
    scenario: &Scenario,
    drivers: usize,
    horizon: f64,
    seed: u64,
    stride: usize,
) -> Result<Vec<Vec<usize>>, ExperimentError> {
    let counts = sample_initial_state(
        scenario.network(),
        drivers,
        derive_seed(seed, &[Stream::Placement as u64]),
    );
    let mut world = AgentWorld::new(scenario, horizon, seed)?;
    for (node, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            world.add_background_at_node(node)?;
        }
    }
    let stride = stride.max(1);
    let mut samples = Vec::new();
    world.advance()?;
    loop {
        if world.step_index() % stride == 0 {
            samples.push(world.idle_on_edge_counts());
        }
        if !world.advance()? {
            break;
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub fleet_sizes: Vec<usize>,
    pub trials: usize,
    pub strategies: Vec<StrategyKind>,
    pub base_seed: u64,
    pub horizon: f64,
    pub wgc: WgcParams,
}

/// Aggregate of one `(strategy, fleet size)` cell. Censored trials are
/// excluded from `mean` and `worst`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: StrategyKind,
    pub fleet_size: usize,
    pub mean: Option<f64>,
    pub worst: Option<f64>,
    pub samples: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    /// Sorted by `(fleet_size, strategy, trial)`.
    pub records: Vec<TrialRecord>,
}

impl CampaignResult {
    pub fn trials(&self, strategy: StrategyKind, fleet_size: usize) -> impl Iterator<Item = &TrialRecord> {
        self.records
            .iter()
            .filter(move |r| r.strategy == strategy && r.fleet_size == fleet_size)
    }

    pub fn summary(&self, strategy: StrategyKind, fleet_size: usize) -> CellSummary {
        let mut samples = 0;
        let mut censored = 0;
        let mut sum = 0.0;
        let mut worst: Option<f64> = None;
        for r in self.trials(strategy, fleet_size) {
            match r.allocation_time {
                Some(t) => {
                    samples += 1;
                    sum += t;
                    worst = Some(worst.map_or(t, |w| w.max(t)));
                }
                None => censored += 1,
            }
        }
        CellSummary {
            strategy,
            fleet_size,
            mean: (samples > 0).then(|| sum / samples as f64),
            worst,
            samples,
            censored,
        }
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        let mut out = Vec::new();
        for &n in &self.config.fleet_sizes {
            for &s in &self.config.strategies {
                out.push(self.summary(s, n));
            }
        }
        out
    }

    /// Per-trial allocation times with censored trials set to the horizon.
    pub fn paired_times(&self, strategy: StrategyKind, fleet_size: usize) -> Vec<f64> {
        self.trials(strategy, fleet_size)
            .map(|r| r.allocation_time.unwrap_or(self.config.horizon))
            .collect()
    }

    /// One-sided sign test that `a` allocates faster than `b`.
    pub fn compare(&self, a: StrategyKind, b: StrategyKind, fleet_size: usize) -> SignTest {
        sign_test(
            &self.paired_times(a, fleet_size),
            &self.paired_times(b, fleet_size),
        )
    }
}

/// Every `(fleet size, trial, strategy)` combination, run in parallel and
/// reduced in a fixed order.
pub fn run_campaign(scenario: &Scenario, cfg: &CampaignConfig) -> Result<CampaignResult, ExperimentError> {
    let runs = campaign_runs(scenario, cfg, |sc, tc, s| run_trial(sc, tc, s).map(|r| (r, ())))?;
    Ok(CampaignResult {
        config: cfg.clone(),
        records: runs.into_iter().map(|(r, ())| r).collect(),
    })
}

/// As [`run_campaign`], also returning each trial's event log in record order.
pub fn run_campaign_logged(
    scenario: &Scenario,
    cfg: &CampaignConfig,
) -> Result<(CampaignResult, Vec<Vec<WorldEvent>>), ExperimentError> {
    let runs = campaign_runs(scenario, cfg, run_trial_logged)?;
    let (records, logs) = runs.into_iter().unzip();
    Ok((
        CampaignResult {
            config: cfg.clone(),
            records,
        },
        logs,
    ))
}

fn campaign_runs<T, F>(
    scenario: &Scenario,
    cfg: &CampaignConfig,
    run: F,
) -> Result<Vec<(TrialRecord, T)>, ExperimentError>
where
    T: Send,
    F: Fn(&Scenario, &TrialConfig, StrategyKind) -> Result<(TrialRecord, T), ExperimentError> + Sync,
{
    if cfg.trials == 0 {
        return Err(ExperimentError::Config("trials must be at least 1".into()));
    }
    if cfg.fleet_sizes.is_empty() || cfg.strategies.is_empty() {
        return Err(ExperimentError::Config(
            "need at least one fleet size and one strategy".into(),
        ));
    }
    let mut tasks = Vec::new();
    for &n in &cfg.fleet_sizes {
        for trial in 0..cfg.trials {
            for &s in &cfg.strategies {
                tasks.push((n, trial, s));
            }
        }
    }
    let mut runs = tasks
        .par_iter()
        .map(|&(fleet_size, trial, strategy)| {
            let tc = TrialConfig {
                fleet_size,
                horizon: cfg.horizon,
                base_seed: cfg.base_seed,
                trial,
                wgc: cfg.wgc,
            };
            run(scenario, &tc, strategy)
        })
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|(r, _)| (r.fleet_size, r.strategy, r.trial));
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandProfile, Sinusoid};
    use crate::network::build_grid;

    fn scenario(rate: f64) -> Scenario {
        let net = build_grid(2, 2, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), rate, 0.1).unwrap();
        Scenario::new(net, profile, 0.1).unwrap()
    }

    fn cfg(n: usize) -> TrialConfig {
        TrialConfig {
            fleet_size: n,
            horizon: 60.0,
            base_seed: 5,
            trial: 0,
            wgc: WgcParams {
                max_edges: 2,
                ..WgcParams::default()
            },
        }
    }

    #[test]
    fn placement_sums_to_fleet() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let one = sample_initial_state(&net, 1, 3);
        assert_eq!(one.iter().filter(|&&c| c == 1).count(), 1);
        for n in [0, 7, 100] {
            assert_eq!(sample_initial_state(&net, n, 11).iter().sum::<u32>() as usize, n);
        }
    }

    #[test]
    fn no_demand_is_censored() {
        let sc = scenario(0.0);
        for s in StrategyKind::ALL {
            let r = run_trial(&sc, &cfg(10), s).unwrap();
            assert_eq!(r.allocation_time, None);
        }
    }

    #[test]
    fn waiting_passenger_is_served_during_traversal() {
        let net = RoadNetwork::new(2, &[(0, 1, 5.0), (1, 0, 5.0)]).unwrap();
        let profile = DemandProfile::from_levels(vec![0.0, 0.0], Sinusoid::FLAT, 0.01).unwrap();
        let sc = Scenario::new(net, profile, 0.1).unwrap();
        let mut world = AgentWorld::new(&sc, 100.0, 1).unwrap();
        world.add_passenger(0, 1e6).unwrap();
        world
            .add_tagged(
                0,
                0,
                TaggedPolicy {
                    strategy: StrategyKind::Greedy,
                    wgc: WgcParams::default(),
                },
            )
            .unwrap();
        let t = world.run().unwrap().unwrap();
        assert!(t <= 5.0);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let sc = scenario(0.3);
        for s in StrategyKind::ALL {
            let (a, la) = run_trial_logged(&sc, &cfg(20), s).unwrap();
            let (b, lb) = run_trial_logged(&sc, &cfg(20), s).unwrap();
            assert_eq!(a, b);
            assert_eq!(la, lb);
        }
    }

    #[test]
    fn driver_count_is_conserved() {
        let sc = scenario(0.5);
        let (mut world, _) = build_world(&sc, &cfg(30), StrategyKind::RandomWalk).unwrap();
        while world.advance().unwrap() {
            assert_eq!(world.census().total(), 30);
            let p = world.passenger_counts();
            assert_eq!(p.spawned, p.matched + p.abandoned + p.waiting);
        }
    }

    #[test]
    fn one_trial_campaign_summary() {
        let sc = scenario(0.3);
        let c = CampaignConfig {
            fleet_sizes: vec![10],
            trials: 1,
            strategies: vec![StrategyKind::Greedy],
            base_seed: 2,
            horizon: 200.0,
            wgc: WgcParams::default(),
        };
        let res = run_campaign(&sc, &c).unwrap();
        let s = res.summary(StrategyKind::Greedy, 10);
        assert_eq!(s.samples + s.censored, 1);
        assert_eq!(s.mean, s.worst);
    }
}
