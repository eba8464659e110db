//! Route selection for the tagged driver.
//!
//! The three baselines pick one edge at a time and are re-invoked at every
//! node. WGC plans a whole path against a fresh fluid forecast.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demand::DemandProfile;
use crate::error::StrategyError;
use crate::fluid::{FluidModel, FluidSettings, FluidState, ScheduledArrival};
use crate::network::{dijkstra, reverse_adjacency, EdgeId, NodeId, RoadNetwork};
use crate::planner::{best_path_beam, best_path_exhaustive, BeamWidth, PathEvaluation, PlanOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Wgc,
    Greedy,
    #[serde(rename = "random")]
    RandomWalk,
    #[serde(rename = "hotspot")]
    HotspotGuided,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Wgc,
        StrategyKind::Greedy,
        StrategyKind::RandomWalk,
        StrategyKind::HotspotGuided,
    ];

    /// Column label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Wgc => "WGC",
            StrategyKind::Greedy => "Greedy",
            StrategyKind::RandomWalk => "Random",
            StrategyKind::HotspotGuided => "Hotspot",
        }
    }

    /// Name accepted in configuration files.
    pub fn key(self) -> &'static str {
        match self {
            StrategyKind::Wgc => "wgc",
            StrategyKind::Greedy => "greedy",
            StrategyKind::RandomWalk => "random",
            StrategyKind::HotspotGuided => "hotspot",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.key().eq_ignore_ascii_case(s) || k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected wgc, greedy, random or hotspot)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WgcParams {
    pub max_edges: usize,
    pub beam: BeamWidth,
    pub eps: f64,
    pub dt: f64,
    /// Forecast length; defaults to `max_edges * max tau`.
    pub horizon: Option<f64>,
}

impl Default for WgcParams {
    fn default() -> Self {
        WgcParams {
            max_edges: 4,
            beam: BeamWidth::Limited(10),
            eps: crate::planner::DEFAULT_EPS,
            dt: 0.1,
            horizon: None,
        }
    }
}

impl WgcParams {
    pub fn forecast_horizon(&self, net: &RoadNetwork) -> f64 {
        self.horizon
            .unwrap_or(self.max_edges as f64 * net.max_travel_time())
    }
}

fn out_edges(net: &RoadNetwork, v: NodeId) -> Result<&[EdgeId], StrategyError> {
    match net.out_edges(v) {
        [] => Err(StrategyError::DeadEnd(v)),
        edges => Ok(edges),
    }
}

/// Uniform choice among the out-edges of `v`.
pub fn route_random_walk<R: Rng + ?Sized>(
    net: &RoadNetwork,
    v: NodeId,
    rng: &mut R,
) -> Result<EdgeId, StrategyError> {
    let edges = out_edges(net, v)?;
    Ok(edges[rng.random_range(0..edges.len())])
}

/// The out-edge with the highest arrival rate at time `t`; ties go to the
/// smallest edge index.
pub fn route_greedy(
    net: &RoadNetwork,
    profile: &DemandProfile,
    v: NodeId,
    t: f64,
) -> Result<EdgeId, StrategyError> {
    let edges = out_edges(net, v)?;
    let mut best = edges[0];
    let mut best_rate = profile.evaluate(best, t);
    for &e in &edges[1..] {
        let rate = profile.evaluate(e, t);
        if rate > best_rate {
            best = e;
            best_rate = rate;
        }
    }
    Ok(best)
}

/// Shortest travel time from every node to the tail of the nearest hotspot
/// edge.
#[derive(Debug, Clone, PartialEq)]
pub struct HotspotMap {
    hotspots: Vec<bool>,
    distance: Vec<f64>,
}

impl HotspotMap {
    pub fn new(net: &RoadNetwork, profile: &DemandProfile) -> Self {
        let mut tails: Vec<NodeId> = profile.hotspots().iter().map(|&e| net.edge(e).tail).collect();
        tails.sort_unstable();
        tails.dedup();
        let distance = if tails.is_empty() {
            vec![f64::INFINITY; net.node_count()]
        } else {
            dijkstra(&reverse_adjacency(net), &tails)
        };
        let mut hotspots = vec![false; net.edge_count()];
        for &e in profile.hotspots() {
            hotspots[e] = true;
        }
        HotspotMap { hotspots, distance }
    }

    pub fn distance(&self, v: NodeId) -> f64 {
        self.distance[v]
    }

    pub fn is_empty(&self) -> bool {
        !self.hotspots.contains(&true)
    }
}

/// Takes a hotspot out-edge when one leaves `v`, otherwise the out-edge whose
/// head is closest to a hotspot tail. Falls back to a random walk when no
/// hotspot is reachable.
pub fn route_hotspot<R: Rng + ?Sized>(
    net: &RoadNetwork,
    map: &HotspotMap,
    v: NodeId,
    rng: &mut R,
) -> Result<EdgeId, StrategyError> {
    let edges = out_edges(net, v)?;
    if let Some(&e) = edges.iter().find(|&&e| map.hotspots[e]) {
        return Ok(e);
    }
    let mut best: Option<(f64, EdgeId)> = None;
    for &e in edges {
        let d = map.distance(net.edge(e).head);
        if d.is_finite() && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, e));
        }
    }
    match best {
        Some((_, e)) => Ok(e),
        None => route_random_walk(net, v, rng),
    }
}

/// Forecasts the fleet from `initial` at `request_time` and returns the best
/// path from `v`.
pub fn route_wgc(
    net: &RoadNetwork,
    profile: &DemandProfile,
    initial: &FluidState,
    scheduled: &[ScheduledArrival],
    v: NodeId,
    request_time: f64,
    params: &WgcParams,
) -> Result<PathEvaluation, StrategyError> {
    let settings = FluidSettings {
        start_time: request_time,
        ..FluidSettings::new(params.dt)
    };
    let model = FluidModel::new(net, profile, settings).map_err(crate::error::PlanError::from)?;
    let traj = model
        .integrate_with_arrivals(initial, scheduled, params.forecast_horizon(net))
        .map_err(crate::error::PlanError::from)?;
    let opts = PlanOptions::with_eps(params.eps);
    let eval = match params.beam {
        BeamWidth::Unbounded => best_path_exhaustive(net, v, params.max_edges, &traj, opts)?,
        width => best_path_beam(net, v, params.max_edges, &traj, opts, width)?,
    };
    Ok(eval)
}
