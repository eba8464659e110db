use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::allocation_hazard;
use crate::error::FluidError;
use crate::network::{EdgeId, NodeId};

/// Discretized forecast `t_k = start_time + k * dt`, `k = 0..steps()`.
///
/// Per-edge series are stored step-major: `queue[k * edge_count + e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidTrajectory {
    pub(crate) dt: f64,
    pub(crate) horizon: f64,
    pub(crate) start_time: f64,
    pub(crate) eps_d: f64,
    pub(crate) edge_count: usize,
    pub(crate) node_count: usize,
    pub(crate) queue: Vec<f64>,
    pub(crate) idle_on_edge: Vec<f64>,
    pub(crate) matching: Vec<f64>,
    pub(crate) idle_at_node: Vec<f64>,
    pub(crate) occupied: Vec<f64>,
    pub(crate) clamped: Vec<f64>,
}

/// Sums of the driver populations at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassTotals {
    pub idle_on_edges: f64,
    pub idle_at_nodes: f64,
    pub occupied: f64,
}

impl MassTotals {
    pub fn total(&self) -> f64 {
        self.idle_on_edges + self.idle_at_nodes + self.occupied
    }
}

/// Externally supplied forecast series, step-major like [`FluidTrajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    pub dt: f64,
    pub start_time: f64,
    pub eps_d: f64,
    pub edge_count: usize,
    pub node_count: usize,
    pub queue: Vec<f64>,
    pub idle_on_edge: Vec<f64>,
    pub idle_at_node: Vec<f64>,
    pub occupied: Vec<f64>,
}

impl FluidTrajectory {
    /// Wraps a forecast produced elsewhere so the planner can read it.
    /// Matching is recomputed as `min(D, Q)`.
    pub fn from_series(s: ForecastSeries) -> Result<Self, FluidError> {
        if !(s.dt.is_finite() && s.dt > 0.0) {
            return Err(FluidError::StepSize(s.dt));
        }
        let steps = s.occupied.len();
        if steps == 0 {
            return Err(FluidError::Shape {
                what: "occupied",
                expected: 1,
                found: 0,
            });
        }
        for (what, len, width) in [
            ("queue", s.queue.len(), s.edge_count),
            ("idle_on_edge", s.idle_on_edge.len(), s.edge_count),
            ("idle_at_node", s.idle_at_node.len(), s.node_count),
        ] {
            if len != steps * width {
                return Err(FluidError::Shape {
                    what,
                    expected: steps * width,
                    found: len,
                });
            }
        }
        for (what, v) in [
            ("queue", &s.queue),
            ("idle_on_edge", &s.idle_on_edge),
            ("idle_at_node", &s.idle_at_node),
            ("occupied", &s.occupied),
        ] {
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(FluidError::NegativeMass(what));
            }
        }
        let matching = s
            .idle_on_edge
            .iter()
            .zip(&s.queue)
            .map(|(&d, &q)| d.min(q))
            .collect();
        Ok(Self {
            dt: s.dt,
            horizon: (steps - 1) as f64 * s.dt,
            start_time: s.start_time,
            eps_d: s.eps_d,
            edge_count: s.edge_count,
            node_count: s.node_count,
            queue: s.queue,
            idle_on_edge: s.idle_on_edge,
            matching,
            idle_at_node: s.idle_at_node,
            occupied: s.occupied,
            clamped: vec![0.0; steps],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn eps_d(&self) -> f64 {
        self.eps_d
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of stored time points, `floor(horizon / dt) + 1`.
    pub fn steps(&self) -> usize {
        self.occupied.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    pub fn queue(&self, k: usize, e: EdgeId) -> f64 {
        self.queue[k * self.edge_count + e]
    }

    pub fn idle_on_edge(&self, k: usize, e: EdgeId) -> f64 {
        self.idle_on_edge[k * self.edge_count + e]
    }

    pub fn matching(&self, k: usize, e: EdgeId) -> f64 {
        self.matching[k * self.edge_count + e]
    }

    pub fn idle_at_node(&self, k: usize, u: NodeId) -> f64 {
        self.idle_at_node[k * self.node_count + u]
    }

    pub fn occupied(&self, k: usize) -> f64 {
        self.occupied[k]
    }

    /// Mass added by non-negativity clamping during the step that produced `k`.
    pub fn clamped(&self, k: usize) -> f64 {
        self.clamped[k]
    }

    /// Allocation hazard felt on edge `e` at step `k`.
    pub fn hazard(&self, k: usize, e: EdgeId) -> f64 {
        let i = k * self.edge_count + e;
        allocation_hazard(self.idle_on_edge[i], self.queue[i], self.eps_d)
    }

    pub fn totals(&self, k: usize) -> MassTotals {
        let e = self.edge_count;
        let v = self.node_count;
        MassTotals {
            idle_on_edges: self.idle_on_edge[k * e..(k + 1) * e].iter().sum(),
            idle_at_nodes: self.idle_at_node[k * v..(k + 1) * v].iter().sum(),
            occupied: self.occupied[k],
        }
    }

    /// Columnar dump with header `step,variable,index,value`. Variables are
    /// `Q`, `D`, `A` (per edge), `P` (per node) and `occupied` (index 0).
    /// Only every `stride`-th step is written.
    pub fn write_columnar<W: Write>(&self, out: W, stride: usize) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "variable", "index", "value"])?;
        for k in (0..self.steps()).step_by(stride.max(1)) {
            let step = k.to_string();
            for (name, series, width) in [
                ("Q", &self.queue, self.edge_count),
                ("D", &self.idle_on_edge, self.edge_count),
                ("A", &self.matching, self.edge_count),
                ("P", &self.idle_at_node, self.node_count),
            ] {
                for (i, v) in series[k * width..(k + 1) * width].iter().enumerate() {
                    w.write_record([step.as_str(), name, &i.to_string(), &v.to_string()])?;
                }
            }
            w.write_record([step.as_str(), "occupied", "0", &self.occupied[k].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-step driver totals with header
    /// `step,time,idle_on_edges,idle_at_nodes,occupied,total`.
    pub fn write_aggregate<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for k in 0..self.steps() {
            let m = self.totals(k);
            w.serialize(AggregateRow {
                step: k,
                time: self.time(k),
                idle_on_edges: m.idle_on_edges,
                idle_at_nodes: m.idle_at_nodes,
                occupied: m.occupied,
                total: m.total(),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnarRow {
    pub step: usize,
    pub variable: String,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub step: usize,
    pub time: f64,
    pub idle_on_edges: f64,
    pub idle_at_nodes: f64,
    pub occupied: f64,
    pub total: f64,
}

pub fn read_columnar<R: Read>(input: R) -> csv::Result<Vec<ColumnarRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn read_aggregate<R: Read>(input: R) -> csv::Result<Vec<AggregateRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
