//! Cruising-path evaluation against a fluid forecast.
//!
//! A tagged driver following path `(e_1, ..., e_K)` from `v_0` survives
//! unmatched with probability `S(t)`, the product of per-step survival
//! factors `exp(-h dt)` of the edge it is on. The objective is the expected
//! allocation time truncated at the end of the path, `sum_k S(t_k) dt`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::fluid::{delay_steps, FluidTrajectory};
use crate::network::{EdgeId, NodeId, RoadNetwork};

pub const DEFAULT_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    start: NodeId,
    edges: Vec<EdgeId>,
}

impl Path {
    /// Checks that `edges` form a simple chain starting at `start`.
    pub fn new(net: &RoadNetwork, start: NodeId, edges: Vec<EdgeId>) -> Result<Self, PlanError> {
        if start >= net.node_count() {
            return Err(PlanError::UnknownNode(start));
        }
        let mut visited = vec![false; net.node_count()];
        visited[start] = true;
        let mut at = start;
        for &e in &edges {
            if e >= net.edge_count() {
                return Err(PlanError::InvalidPath);
            }
            let edge = net.edge(e);
            if edge.tail != at || visited[edge.head] {
                return Err(PlanError::InvalidPath);
            }
            visited[edge.head] = true;
            at = edge.head;
        }
        Ok(Path { start, edges })
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn end(&self, net: &RoadNetwork) -> NodeId {
        self.edges.last().map_or(self.start, |&e| net.edge(e).head)
    }

    pub fn nodes(&self, net: &RoadNetwork) -> Vec<NodeId> {
        std::iter::once(self.start)
            .chain(self.edges.iter().map(|&e| net.edge(e).head))
            .collect()
    }

    /// Cumulative traversal times `T_1, ..., T_K`.
    pub fn cumulative_times(&self, net: &RoadNetwork) -> Vec<f64> {
        self.edges
            .iter()
            .scan(0.0, |t, &e| {
                *t += net.travel_time(e);
                Some(*t)
            })
            .collect()
    }

    pub fn travel_time(&self, net: &RoadNetwork) -> f64 {
        self.edges.iter().map(|&e| net.travel_time(e)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEvaluation {
    pub path: Path,
    /// `sum_k S(t_k) dt` up to the end of the path or early termination.
    pub expected_time: f64,
    pub terminal_survival: f64,
    pub travel_time: f64,
    /// `S(t_0), S(t_1), ...` when requested.
    pub survival_curve: Option<Vec<f64>>,
}

impl PathEvaluation {
    fn better_than(&self, other: &PathEvaluation) -> bool {
        compare(
            self.expected_time,
            &self.path.edges,
            other.expected_time,
            &other.path.edges,
        ) == Ordering::Less
    }
}

fn compare(a: f64, a_edges: &[EdgeId], b: f64, b_edges: &[EdgeId]) -> Ordering {
    a.total_cmp(&b).then_with(|| a_edges.cmp(b_edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Evaluation stops once survival falls below this level.
    pub eps: f64,
    /// Trajectory step at which the driver starts the path.
    pub offset_steps: usize,
    pub keep_curve: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            eps: DEFAULT_EPS,
            offset_steps: 0,
            keep_curve: false,
        }
    }
}

impl PlanOptions {
    pub fn with_eps(eps: f64) -> Self {
        PlanOptions {
            eps,
            ..Self::default()
        }
    }
}

/// Survival and accumulated expected time after walking part of a path.
#[derive(Debug, Clone)]
struct Walk {
    steps: usize,
    expected: f64,
    survival: f64,
    curve: Option<Vec<f64>>,
}

struct Evaluator<'a> {
    net: &'a RoadNetwork,
    traj: &'a FluidTrajectory,
    opts: PlanOptions,
    edge_steps: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    fn new(net: &'a RoadNetwork, traj: &'a FluidTrajectory, opts: PlanOptions) -> Result<Self, PlanError> {
        if traj.edge_count() != net.edge_count() || traj.node_count() != net.node_count() {
            return Err(PlanError::Mismatch);
        }
        let edge_steps = net
            .travel_times()
            .iter()
            .map(|&tau| delay_steps(tau, traj.dt()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Evaluator {
            net,
            traj,
            opts,
            edge_steps,
        })
    }

    fn start(&self) -> Walk {
        Walk {
            steps: 0,
            expected: 0.0,
            survival: 1.0,
            curve: self.opts.keep_curve.then(|| vec![1.0]),
        }
    }

    /// Forecast steps available to a path starting at the offset.
    fn available_steps(&self) -> usize {
        (self.traj.steps() - 1).saturating_sub(self.opts.offset_steps)
    }

    fn check_horizon(&self, total_steps: usize) -> Result<(), PlanError> {
        if total_steps > self.available_steps() {
            let dt = self.traj.dt();
            return Err(PlanError::InsufficientForecast {
                needed: total_steps as f64 * dt,
                available: self.available_steps() as f64 * dt,
            });
        }
        Ok(())
    }

    /// Walks edge `e` starting from `walk`.
    fn advance(&self, walk: &mut Walk, e: EdgeId) {
        let dt = self.traj.dt();
        let m = self.edge_steps[e];
        for _ in 0..m {
            if walk.survival < self.opts.eps {
                break;
            }
            let h = self.traj.hazard(self.opts.offset_steps + walk.steps, e);
            walk.expected += walk.survival * dt;
            walk.survival *= (-h * dt).exp();
            walk.steps += 1;
            if let Some(curve) = walk.curve.as_mut() {
                curve.push(walk.survival);
            }
        }
    }

    fn finish(&self, path: Path, walk: Walk) -> PathEvaluation {
        PathEvaluation {
            travel_time: path.travel_time(self.net),
            path,
            expected_time: walk.expected,
            terminal_survival: walk.survival,
            survival_curve: walk.curve,
        }
    }

    fn evaluate(&self, path: &Path) -> Result<PathEvaluation, PlanError> {
        let total: usize = path.edges.iter().map(|&e| self.edge_steps[e]).sum();
        self.check_horizon(total)?;
        let mut walk = self.start();
        for &e in &path.edges {
            self.advance(&mut walk, e);
        }
        Ok(self.finish(path.clone(), walk))
    }
}

/// Expected allocation time and survival of a tagged driver on `path`.
pub fn evaluate_path(
    net: &RoadNetwork,
    path: &Path,
    traj: &FluidTrajectory,
    opts: PlanOptions,
) -> Result<PathEvaluation, PlanError> {
    Evaluator::new(net, traj, opts)?.evaluate(path)
}

/// Every simple path of `1..=max_edges` edges from `start`, in lexicographic
/// edge-index order.
pub fn enumerate_paths(net: &RoadNetwork, start: NodeId, max_edges: usize) -> Result<Vec<Path>, PlanError> {
    if start >= net.node_count() {
        return Err(PlanError::UnknownNode(start));
    }
    if max_edges == 0 {
        return Err(PlanError::ZeroLength);
    }
    fn dfs(
        net: &RoadNetwork,
        start: NodeId,
        at: NodeId,
        max_edges: usize,
        visited: &mut [bool],
        stack: &mut Vec<EdgeId>,
        out: &mut Vec<Path>,
    ) {
        for &e in net.out_edges(at) {
            let head = net.edge(e).head;
            if visited[head] {
                continue;
            }
            stack.push(e);
            out.push(Path {
                start,
                edges: stack.clone(),
            });
            if stack.len() < max_edges {
                visited[head] = true;
                dfs(net, start, head, max_edges, visited, stack, out);
                visited[head] = false;
            }
            stack.pop();
        }
    }
    let mut visited = vec![false; net.node_count()];
    visited[start] = true;
    let mut out = Vec::new();
    dfs(
        net,
        start,
        start,
        max_edges,
        &mut visited,
        &mut Vec::new(),
        &mut out,
    );
    Ok(out)
}

fn has_extension(net: &RoadNetwork, visited: &[bool], at: NodeId) -> bool {
    net.out_edges(at).iter().any(|&e| !visited[net.edge(e).head])
}

/// A path competes for the argmin when it has `max_edges` edges or cannot be
/// extended without revisiting a node. Shorter prefixes are excluded: the
/// objective is truncated at the end of the path, so a prefix never scores
/// worse than its extensions and would always win.
pub fn is_complete(net: &RoadNetwork, path: &Path, max_edges: usize) -> bool {
    if path.len() >= max_edges {
        return true;
    }
    let mut visited = vec![false; net.node_count()];
    for v in path.nodes(net) {
        visited[v] = true;
    }
    !has_extension(net, &visited, path.end(net))
}

/// Minimum expected allocation time over the complete simple paths (see
/// [`is_complete`]) of at most `max_edges` edges; ties go to the
/// lexicographically smallest edge sequence.
pub fn best_path_exhaustive(
    net: &RoadNetwork,
    start: NodeId,
    max_edges: usize,
    traj: &FluidTrajectory,
    opts: PlanOptions,
) -> Result<PathEvaluation, PlanError> {
    let evaluator = Evaluator::new(net, traj, opts)?;
    let paths: Vec<Path> = enumerate_paths(net, start, max_edges)?
        .into_iter()
        .filter(|p| is_complete(net, p, max_edges))
        .collect();
    let evaluations: Vec<PathEvaluation> = paths
        .par_iter()
        .map(|p| evaluator.evaluate(p))
        .collect::<Result<_, _>>()?;
    evaluations
        .into_iter()
        .reduce(|best, cand| if cand.better_than(&best) { cand } else { best })
        .ok_or(PlanError::NoCandidate(start))
}

/// Beam width; `Unbounded` keeps every partial path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamWidth {
    Limited(usize),
    Unbounded,
}

impl BeamWidth {
    fn limit(self) -> usize {
        match self {
            BeamWidth::Limited(k) => k,
            BeamWidth::Unbounded => usize::MAX,
        }
    }
}

struct Partial {
    edges: Vec<EdgeId>,
    visited: Vec<bool>,
    at: NodeId,
    walk: Walk,
    travel_time: f64,
    score: f64,
}

/// Depth-synchronous beam search. Every partial path is scored by
/// `T_alloc + S * (budget - T_partial)` where `budget = max_edges * max tau`,
/// and only the best `width` survive each depth. Candidates are the paths
/// reaching depth `max_edges` plus every generated dead end, so an unbounded
/// beam returns exactly what [`best_path_exhaustive`] returns.
pub fn best_path_beam(
    net: &RoadNetwork,
    start: NodeId,
    max_edges: usize,
    traj: &FluidTrajectory,
    opts: PlanOptions,
    width: BeamWidth,
) -> Result<PathEvaluation, PlanError> {
    if start >= net.node_count() {
        return Err(PlanError::UnknownNode(start));
    }
    if max_edges == 0 {
        return Err(PlanError::ZeroLength);
    }
    if width == BeamWidth::Limited(0) {
        return Err(PlanError::ZeroBeam);
    }
    let evaluator = Evaluator::new(net, traj, opts)?;
    let budget = max_edges as f64 * net.max_travel_time();

    let mut visited = vec![false; net.node_count()];
    visited[start] = true;
    let mut frontier = vec![Partial {
        edges: Vec::new(),
        visited,
        at: start,
        walk: evaluator.start(),
        travel_time: 0.0,
        score: 0.0,
    }];
    let mut best: Option<(f64, Vec<EdgeId>, Walk)> = None;

    for _ in 0..max_edges {
        let mut next = Vec::new();
        for partial in &frontier {
            for &e in net.out_edges(partial.at) {
                let head = net.edge(e).head;
                if partial.visited[head] {
                    continue;
                }
                let mut walk = partial.walk.clone();
                evaluator.check_horizon(walk_steps_after(&evaluator, &partial.edges, e))?;
                evaluator.advance(&mut walk, e);
                let mut edges = partial.edges.clone();
                edges.push(e);
                let travel_time = partial.travel_time + net.travel_time(e);
                let mut visited = partial.visited.clone();
                visited[head] = true;
                let complete = edges.len() == max_edges || !has_extension(net, &visited, head);
                let improves = complete
                    && best.as_ref().is_none_or(|(value, best_edges, _)| {
                        compare(walk.expected, &edges, *value, best_edges) == Ordering::Less
                    });
                if improves {
                    best = Some((walk.expected, edges.clone(), walk.clone()));
                }
                if complete {
                    continue;
                }
                next.push(Partial {
                    score: walk.expected + walk.survival * (budget - travel_time),
                    edges,
                    visited,
                    at: head,
                    walk,
                    travel_time,
                });
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_by(|a, b| compare(a.score, &a.edges, b.score, &b.edges));
        next.truncate(width.limit());
        frontier = next;
    }

    let (_, edges, walk) = best.ok_or(PlanError::NoCandidate(start))?;
    Ok(evaluator.finish(Path { start, edges }, walk))
}

fn walk_steps_after(evaluator: &Evaluator<'_>, prefix: &[EdgeId], e: EdgeId) -> usize {
    prefix
        .iter()
        .chain(std::iter::once(&e))
        .map(|&x| evaluator.edge_steps[x])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DemandProfile;
    use crate::fluid::FluidTrajectory;
    use crate::network::build_grid;
    use approx::assert_abs_diff_eq;

    /// A trajectory whose hazard on each edge is the given constant: `D = 1`
    /// and `Q = h` for `h < 1`.
    fn constant_hazard_trajectory(
        net: &RoadNetwork,
        hazards: &[f64],
        dt: f64,
        horizon: f64,
    ) -> FluidTrajectory {
        let steps = crate::fluid::horizon_steps(horizon, dt) + 1;
        let e = net.edge_count();
        let v = net.node_count();
        let mut queue = Vec::with_capacity(steps * e);
        for _ in 0..steps {
            queue.extend_from_slice(hazards);
        }
        FluidTrajectory {
            dt,
            horizon,
            start_time: 0.0,
            eps_d: 1e-9,
            edge_count: e,
            node_count: v,
            matching: queue.clone(),
            queue,
            idle_on_edge: vec![1.0; steps * e],
            idle_at_node: vec![0.0; steps * v],
            occupied: vec![0.0; steps],
            clamped: vec![0.0; steps],
        }
    }

    fn star() -> RoadNetwork {
        RoadNetwork::new(3, &[(0, 1, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn zero_hazard_path_takes_its_full_length() {
        let net = RoadNetwork::new(3, &[(0, 1, 4.0), (1, 2, 6.0)]).unwrap();
        let traj = constant_hazard_trajectory(&net, &[0.0, 0.0], 0.1, 20.0);
        let path = Path::new(&net, 0, vec![0, 1]).unwrap();
        let ev = evaluate_path(&net, &path, &traj, PlanOptions::default()).unwrap();
        assert_abs_diff_eq!(ev.expected_time, 10.0, epsilon = 1e-9);
        assert_eq!(ev.terminal_survival, 1.0);
    }

    #[test]
    fn constant_hazard_matches_closed_form() {
        let net = RoadNetwork::new(2, &[(0, 1, 10.0)]).unwrap();
        let traj = constant_hazard_trajectory(&net, &[0.2], 0.01, 10.0);
        let path = Path::new(&net, 0, vec![0]).unwrap();
        let ev = evaluate_path(&net, &path, &traj, PlanOptions::with_eps(0.0)).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 0.2;
        assert!((ev.expected_time - exact).abs() / exact < 0.02);
        assert_abs_diff_eq!(ev.terminal_survival, (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn short_forecast_is_rejected() {
        let net = RoadNetwork::new(2, &[(0, 1, 10.0)]).unwrap();
        let traj = constant_hazard_trajectory(&net, &[0.2], 0.1, 5.0);
        let path = Path::new(&net, 0, vec![0]).unwrap();
        assert!(matches!(
            evaluate_path(&net, &path, &traj, PlanOptions::default()),
            Err(PlanError::InsufficientForecast { .. })
        ));
    }

    #[test]
    fn path_validation() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let a = net.edge_between(0, 1).unwrap();
        let back = net.edge_between(1, 0).unwrap();
        let c = net.edge_between(2, 3).unwrap();
        assert!(Path::new(&net, 0, vec![a]).is_ok());
        assert!(Path::new(&net, 0, vec![a, back]).is_err());
        assert!(Path::new(&net, 0, vec![c]).is_err());
        assert!(Path::new(&net, 9, vec![]).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let ab = RoadNetwork::new(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let paths = enumerate_paths(&ab, 0, 2).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].edges(), &[ab.edge_between(0, 1).unwrap()]);

        let grid = build_grid(2, 2, 1.0).unwrap();
        assert_eq!(enumerate_paths(&grid, 0, 2).unwrap().len(), 4);
        assert_eq!(
            enumerate_paths(&grid, 0, 1).unwrap().len(),
            grid.out_edges(0).len()
        );
        let lone = RoadNetwork::new(2, &[(1, 0, 1.0)]).unwrap();
        assert!(enumerate_paths(&lone, 0, 3).unwrap().is_empty());
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let grid = build_grid(3, 3, 1.0).unwrap();
        let paths = enumerate_paths(&grid, 4, 3).unwrap();
        assert!(paths.windows(2).all(|w| w[0].edges() < w[1].edges()));
    }

    #[test]
    fn dominance_and_ties() {
        let net = star();
        let traj = constant_hazard_trajectory(&net, &[0.9, 0.0], 0.1, 5.0);
        let best = best_path_exhaustive(&net, 0, 2, &traj, PlanOptions::default()).unwrap();
        assert_eq!(best.path.edges(), &[0]);
        let beam = best_path_beam(&net, 0, 2, &traj, PlanOptions::default(), BeamWidth::Limited(1)).unwrap();
        assert_eq!(beam.path.edges(), &[0]);

        let flat = constant_hazard_trajectory(&net, &[0.3, 0.3], 0.1, 5.0);
        let tie = best_path_exhaustive(&net, 0, 2, &flat, PlanOptions::default()).unwrap();
        assert_eq!(tie.path.edges(), &[0]);
    }

    #[test]
    fn unbounded_beam_equals_exhaustive() {
        let net = build_grid(3, 3, 1.0).unwrap();
        let hazards: Vec<f64> = (0..net.edge_count()).map(|e| (e % 5) as f64 * 0.2).collect();
        let traj = constant_hazard_trajectory(&net, &hazards, 0.1, 10.0);
        for v in 0..9 {
            let ex = best_path_exhaustive(&net, v, 4, &traj, PlanOptions::default()).unwrap();
            let bm = best_path_beam(&net, v, 4, &traj, PlanOptions::default(), BeamWidth::Unbounded).unwrap();
            assert_eq!(ex, bm);
        }
    }

    #[test]
    fn beam_rejects_zero_width() {
        let net = star();
        let traj = constant_hazard_trajectory(&net, &[0.1, 0.1], 0.1, 5.0);
        assert!(matches!(
            best_path_beam(&net, 0, 1, &traj, PlanOptions::default(), BeamWidth::Limited(0)),
            Err(PlanError::ZeroBeam)
        ));
        let lone = RoadNetwork::new(2, &[(1, 0, 1.0)]).unwrap();
        let traj = constant_hazard_trajectory(&lone, &[0.1], 0.1, 5.0);
        assert!(matches!(
            best_path_exhaustive(&lone, 0, 2, &traj, PlanOptions::default()),
            Err(PlanError::NoCandidate(0))
        ));
    }

    #[test]
    fn survival_curve_is_monotone() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.3, 0.1).unwrap();
        let model =
            crate::fluid::FluidModel::new(&net, &profile, crate::fluid::FluidSettings::new(0.1)).unwrap();
        let traj = model
            .integrate(
                &crate::fluid::FluidState::idle_at_nodes(&net, &[2, 0, 1, 3]),
                10.0,
            )
            .unwrap();
        let opts = PlanOptions {
            keep_curve: true,
            ..PlanOptions::with_eps(0.0)
        };
        for path in enumerate_paths(&net, 0, 3).unwrap() {
            let ev = evaluate_path(&net, &path, &traj, opts).unwrap();
            let curve = ev.survival_curve.unwrap();
            assert!(curve.windows(2).all(|w| w[1] <= w[0]));
            assert!(ev.expected_time <= ev.travel_time + 1e-12);
            assert!(ev.expected_time >= ev.travel_time * ev.terminal_survival - 1e-12);
        }
    }
}
