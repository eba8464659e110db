//! Directed road network with CTMC cruising probabilities, trip-destination
//! probabilities and the travel-time tables derived from them.
//!
//! Edges are identified by a dense index assigned in `(tail, head)` order, so
//! every per-edge table in the crate is a plain `Vec` indexed by [`EdgeId`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NetworkError;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Tolerance used for every row-stochasticity check.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
}

/// How per-node destination popularity is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityWeights {
    Uniform,
    Explicit(Vec<f64>),
    /// Independent `U(0, 1)` weight per node drawn from the seed.
    Random {
        seed: u64,
    },
}

impl PopularityWeights {
    pub fn resolve(&self, node_count: usize) -> Result<Vec<f64>, NetworkError> {
        let weights = match self {
            PopularityWeights::Uniform => vec![1.0; node_count],
            PopularityWeights::Explicit(w) => {
                if w.len() != node_count {
                    return Err(NetworkError::WeightCount {
                        expected: node_count,
                        found: w.len(),
                    });
                }
                w.clone()
            }
            PopularityWeights::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..node_count).map(|_| rng.random::<f64>()).collect()
            }
        };
        if let Some(bad) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(NetworkError::NegativeWeight(bad));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(NetworkError::AllZeroWeights);
        }
        Ok(weights)
    }
}

/// An immutable road network.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    node_count: usize,
    grid: Option<(usize, usize)>,
    edges: Vec<Edge>,
    travel_time: Vec<f64>,
    transition: Vec<f64>,
    destination: Vec<Vec<f64>>,
    trip_time: Vec<Vec<f64>>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
}

impl RoadNetwork {
    /// Builds a network from `(tail, head, travel_time)` triples with uniform
    /// cruising probabilities and uniform destination popularity.
    pub fn new(node_count: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self, NetworkError> {
        if node_count == 0 {
            return Err(NetworkError::Empty);
        }
        let mut sorted: Vec<(Edge, f64)> = Vec::with_capacity(edges.len());
        for &(tail, head, tau) in edges {
            if tail >= node_count || head >= node_count {
                return Err(NetworkError::UnknownNode {
                    tail,
                    head,
                    node_count,
                });
            }
            if tail == head {
                return Err(NetworkError::SelfLoop(tail));
            }
            if !(tau.is_finite() && tau > 0.0) {
                return Err(NetworkError::TravelTime { tail, head, tau });
            }
            sorted.push((Edge { tail, head }, tau));
        }
        sorted.sort_by_key(|a| a.0);
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(NetworkError::DuplicateEdge {
                tail: w[0].0.tail,
                head: w[0].0.head,
            });
        }

        let edges: Vec<Edge> = sorted.iter().map(|(e, _)| *e).collect();
        let travel_time: Vec<f64> = sorted.iter().map(|(_, t)| *t).collect();
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_edges = vec![Vec::new(); node_count];
        for (id, e) in edges.iter().enumerate() {
            out_edges[e.tail].push(id);
            in_edges[e.head].push(id);
        }
        let transition = edges
            .iter()
            .map(|e| 1.0 / out_edges[e.tail].len() as f64)
            .collect();

        let mut net = RoadNetwork {
            node_count,
            grid: None,
            edges,
            travel_time,
            transition,
            destination: Vec::new(),
            trip_time: Vec::new(),
            out_edges,
            in_edges,
        };
        net.trip_time = return_delays(&net);
        net.destination = destination_popularity(&net, &PopularityWeights::Uniform)?;
        Ok(net)
    }

    /// Replaces the CTMC cruising probabilities. Entries are
    /// `(tail, head, probability)`; edges not mentioned keep their current
    /// value. Rows must still sum to one afterwards.
    pub fn with_transition_override(
        mut self,
        overrides: &[(NodeId, NodeId, f64)],
    ) -> Result<Self, NetworkError> {
        for &(tail, head, p) in overrides {
            let id = self
                .edge_between(tail, head)
                .ok_or(NetworkError::MissingEdge { tail, head })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(NetworkError::Probability { tail, head, p });
            }
            self.transition[id] = p;
        }
        for u in 0..self.node_count {
            if self.out_edges[u].is_empty() {
                continue;
            }
            let sum: f64 = self.out_edges[u].iter().map(|&e| self.transition[e]).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(NetworkError::TransitionRow { node: u, sum });
            }
        }
        Ok(self)
    }

    pub fn with_popularity(mut self, weights: &PopularityWeights) -> Result<Self, NetworkError> {
        self.destination = destination_popularity(&self, weights)?;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(rows, cols)` when the network came from [`build_grid`].
    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn travel_time(&self, e: EdgeId) -> f64 {
        self.travel_time[e]
    }

    pub fn travel_times(&self) -> &[f64] {
        &self.travel_time
    }

    pub fn max_travel_time(&self) -> f64 {
        self.travel_time.iter().cloned().fold(0.0, f64::max)
    }

    /// CTMC probability `Q_{tail(e), head(e)}`.
    pub fn transition(&self, e: EdgeId) -> f64 {
        self.transition[e]
    }

    /// Dense `Q_{uv}`; zero for non-neighbours.
    pub fn transition_between(&self, u: NodeId, v: NodeId) -> f64 {
        self.edge_between(u, v).map_or(0.0, |e| self.transition[e])
    }

    /// Trip-destination probability `R_{e -> u}`.
    pub fn destination(&self, e: EdgeId, u: NodeId) -> f64 {
        self.destination[e][u]
    }

    pub fn destination_row(&self, e: EdgeId) -> &[f64] {
        &self.destination[e]
    }

    /// Occupied travel time `tau_{eu}`; `f64::INFINITY` when `u` is unreachable.
    pub fn trip_time(&self, e: EdgeId, u: NodeId) -> f64 {
        self.trip_time[e][u]
    }

    pub fn out_edges(&self, u: NodeId) -> &[EdgeId] {
        &self.out_edges[u]
    }

    pub fn in_edges(&self, u: NodeId) -> &[EdgeId] {
        &self.in_edges[u]
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.out_edges
            .get(u)?
            .iter()
            .copied()
            .find(|&e| self.edges[e].head == v)
    }

    /// Structured-text form used for golden files and audits.
    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            nodes: self.node_count,
            grid: self.grid,
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(id, e)| EdgeRecord {
                    id,
                    tail: e.tail,
                    head: e.head,
                    travel_time: self.travel_time[id],
                    transition: self.transition[id],
                })
                .collect(),
            destination: self.destination.clone(),
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self, NetworkError> {
        let triples: Vec<_> = doc
            .edges
            .iter()
            .map(|r| (r.tail, r.head, r.travel_time))
            .collect();
        let overrides: Vec<_> = doc.edges.iter().map(|r| (r.tail, r.head, r.transition)).collect();
        let mut net = RoadNetwork::new(doc.nodes, &triples)?.with_transition_override(&overrides)?;
        if doc.destination.len() != net.edge_count()
            || doc.destination.iter().any(|row| row.len() != net.node_count)
        {
            return Err(NetworkError::DocumentShape);
        }
        for (e, row) in doc.destination.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(NetworkError::DestinationRow { edge: e, sum });
            }
        }
        net.destination = doc.destination.clone();
        net.grid = doc.grid;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub tail: NodeId,
    pub head: NodeId,
    pub travel_time: f64,
    pub transition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub nodes: usize,
    pub grid: Option<(usize, usize)>,
    pub edges: Vec<EdgeRecord>,
    /// One row per edge, one column per node.
    pub destination: Vec<Vec<f64>>,
}

/// Node index of the lattice point `(row, col)` in a grid with `cols` columns.
pub fn grid_node(cols: usize, row: usize, col: usize) -> NodeId {
    row * cols + col
}

/// A `rows x cols` lattice where each adjacency carries two directed edges.
pub fn build_grid(rows: usize, cols: usize, tau_default: f64) -> Result<RoadNetwork, NetworkError> {
    if rows < 2 || cols < 2 {
        return Err(NetworkError::GridTooSmall { rows, cols });
    }
    let mut triples = Vec::with_capacity(2 * (2 * rows * cols - rows - cols));
    for r in 0..rows {
        for c in 0..cols {
            let u = grid_node(cols, r, c);
            if c + 1 < cols {
                let v = grid_node(cols, r, c + 1);
                triples.push((u, v, tau_default));
                triples.push((v, u, tau_default));
            }
            if r + 1 < rows {
                let v = grid_node(cols, r + 1, c);
                triples.push((u, v, tau_default));
                triples.push((v, u, tau_default));
            }
        }
    }
    let mut net = RoadNetwork::new(rows * cols, &triples)?;
    net.grid = Some((rows, cols));
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest travel times over `adjacency`, where
/// `adjacency[u]` lists `(v, weight)`.
pub(crate) fn dijkstra(adjacency: &[Vec<(NodeId, f64)>], sources: &[NodeId]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Frontier { cost: 0.0, node: s });
    }
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in &adjacency[node] {
            let cand = cost + w;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(Frontier {
                    cost: cand,
                    node: next,
                });
            }
        }
    }
    dist
}

fn forward_adjacency(net: &RoadNetwork) -> Vec<Vec<(NodeId, f64)>> {
    (0..net.node_count)
        .map(|u| {
            net.out_edges[u]
                .iter()
                .map(|&e| (net.edges[e].head, net.travel_time[e]))
                .collect()
        })
        .collect()
}

pub(crate) fn reverse_adjacency(net: &RoadNetwork) -> Vec<Vec<(NodeId, f64)>> {
    (0..net.node_count)
        .map(|u| {
            net.in_edges[u]
                .iter()
                .map(|&e| (net.edges[e].tail, net.travel_time[e]))
                .collect()
        })
        .collect()
}

/// Occupied trip times `tau_{eu}`: the full edge plus the shortest path from
/// the edge head to `u`. Unreachable destinations are `f64::INFINITY`.
pub fn return_delays(net: &RoadNetwork) -> Vec<Vec<f64>> {
    let adjacency = forward_adjacency(net);
    let from_node: Vec<Vec<f64>> = (0..net.node_count).map(|u| dijkstra(&adjacency, &[u])).collect();
    net.edges
        .iter()
        .enumerate()
        .map(|(id, e)| {
            from_node[e.head]
                .iter()
                .map(|d| net.travel_time[id] + d)
                .collect()
        })
        .collect()
}

/// Per-edge destination distribution proportional to `weights` over the
/// nodes reachable from the edge head.
pub fn destination_popularity(
    net: &RoadNetwork,
    weights: &PopularityWeights,
) -> Result<Vec<Vec<f64>>, NetworkError> {
    let weights = weights.resolve(net.node_count)?;
    let mut rows = Vec::with_capacity(net.edges.len());
    for (id, delays) in net.trip_time.iter().enumerate() {
        let mut row: Vec<f64> = delays
            .iter()
            .zip(&weights)
            .map(|(d, w)| if d.is_finite() { *w } else { 0.0 })
            .collect();
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(NetworkError::NoReachableDestination(id));
        }
        row.iter_mut().for_each(|p| *p /= total);
        rows.push(row);
    }
    Ok(rows)
}
