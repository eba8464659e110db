use thiserror::Error;

use crate::network::{EdgeId, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network has no nodes")]
    Empty,
    #[error("grid needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("edge ({tail}, {head}) references a node outside 0..{node_count}")]
    UnknownNode {
        tail: NodeId,
        head: NodeId,
        node_count: usize,
    },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({tail}, {head})")]
    DuplicateEdge { tail: NodeId, head: NodeId },
    #[error("edge ({tail}, {head}) has non-positive travel time {tau}")]
    TravelTime { tail: NodeId, head: NodeId, tau: f64 },
    #[error("no edge ({tail}, {head}) in the network")]
    MissingEdge { tail: NodeId, head: NodeId },
    #[error("transition probability {p} for ({tail}, {head}) is outside [0, 1]")]
    Probability { tail: NodeId, head: NodeId, p: f64 },
    #[error("transition row of node {node} sums to {sum}, expected 1")]
    TransitionRow { node: NodeId, sum: f64 },
    #[error("destination row of edge {edge} sums to {sum}, expected 1")]
    DestinationRow { edge: EdgeId, sum: f64 },
    #[error("popularity weights are all zero")]
    AllZeroWeights,
    #[error("popularity weight of node {0} is negative or not finite")]
    NegativeWeight(NodeId),
    #[error("expected {expected} popularity weights, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("no node with positive popularity is reachable from edge {0}")]
    NoReachableDestination(EdgeId),
    #[error("network document has inconsistent table shapes")]
    DocumentShape,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("hotspot_fraction {hotspot} and cold_fraction {cold} must be non-negative and sum to at most 1")]
    Fractions { hotspot: f64, cold: f64 },
    #[error("hotspot and cold sets overlap on {0} edges after rounding")]
    Overlap(usize),
    #[error("base rate range [{lo}, {hi}] is invalid")]
    BaseRange { lo: f64, hi: f64 },
    #[error("hotspot rate {rate} must be at least the base upper bound {hi}")]
    HotspotRate { rate: f64, hi: f64 },
    #[error("sinusoid amplitude {0} must lie in [0, 1)")]
    Amplitude(f64),
    #[error("sinusoid period {0} must be positive")]
    Period(f64),
    #[error("abandonment rate {0} must be positive")]
    AbandonmentRate(f64),
    #[error("profile covers {found} edges but the network has {expected}")]
    EdgeCount { expected: usize, found: usize },
    #[error("edge {0} is out of range")]
    UnknownEdge(EdgeId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error("step size {0} must be positive and finite")]
    StepSize(f64),
    #[error("horizon {0} must be non-negative and finite")]
    Horizon(f64),
    #[error("delay {delay} s is not an integer multiple of dt = {dt} s")]
    DelayNotMultiple { delay: f64, dt: f64 },
    #[error("initial state has {found} {what} entries, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("initial state contains a negative or non-finite {0} value")]
    NegativeMass(&'static str),
    #[error("scheduled arrival at unknown node {0}")]
    UnknownNode(NodeId),
    #[error("scheduled arrivals carry {scheduled} mass but only {in_transit} is in transit")]
    ScheduledExceedsTransit { scheduled: f64, in_transit: f64 },
    #[error(transparent)]
    Demand(#[from] DemandError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start node {0} is not in the network")]
    UnknownNode(NodeId),
    #[error("maximum path length must be at least 1")]
    ZeroLength,
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error("no candidate path leaves node {0}")]
    NoCandidate(NodeId),
    #[error("path is not a simple connected chain from its start node")]
    InvalidPath,
    #[error("forecast covers {available} s but the path needs {needed} s")]
    InsufficientForecast { needed: f64, available: f64 },
    #[error("trajectory and network disagree on the number of edges")]
    Mismatch,
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("node {0} has no outgoing edge")]
    DeadEnd(NodeId),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid trial configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}
