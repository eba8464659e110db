//! Idle-driver cruising for ride-hailing networks: a delay-equation fluid
//! forecast of queues and idle supply, survival-based path planning on top of
//! that forecast, baseline cruising strategies, and an agent-level Monte Carlo
//! harness that compares them.

pub mod demand;
pub mod error;
pub mod experiment;
pub mod fluid;
pub mod network;
pub mod planner;
pub mod strategies;

pub use demand::{sample_profile, DemandParams, DemandProfile, Sinusoid};
pub use error::{DemandError, ExperimentError, FluidError, NetworkError, PlanError, StrategyError};
pub use experiment::{
    run_campaign, run_campaign_logged, run_trial, sample_initial_state, AgentWorld, CampaignConfig,
    CampaignResult, CellSummary, Scenario, TrialConfig, TrialRecord,
};
pub use fluid::{
    conservation_error, FluidModel, FluidSettings, FluidState, FluidTrajectory, ForecastSeries, Prehistory,
    ScheduledArrival,
};
pub use network::{build_grid, Edge, EdgeId, NodeId, PopularityWeights, RoadNetwork};
pub use planner::{
    best_path_beam, best_path_exhaustive, enumerate_paths, evaluate_path, BeamWidth, Path, PathEvaluation,
    PlanOptions,
};
pub use strategies::{
    route_greedy, route_hotspot, route_random_walk, route_wgc, HotspotMap, StrategyKind, WgcParams,
};
