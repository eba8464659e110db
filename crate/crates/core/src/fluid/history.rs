use serde::{Deserialize, Serialize};

/// What delayed lookups return for times before the start of integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prehistory {
    /// No trip started before `t = 0`, and the initial idle mass of each edge
    /// entered it at a uniform rate over the preceding traversal time, so it
    /// drains out within one `tau_e`. With no drivers on edges at `t = 0`
    /// every delayed flow reads as zero.
    #[default]
    Consistent,
    /// Every delayed read before `t = 0` returns the value at `t = 0`.
    Constant,
}

/// Fixed-capacity ring of past per-edge allocations, hazards and entry flows
/// (`P_u Q_uv` for edge `(u, v)`).
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: usize,
    edge_count: usize,
    pushed: usize,
    matching: Vec<f64>,
    hazard: Vec<f64>,
    entering: Vec<f64>,
    /// Entry flow returned for lags before the first push.
    prior_entering: Vec<f64>,
    prehistory: Prehistory,
    /// Per-edge window lengths and running sums of the last `window[e]`
    /// hazards, maintained on push.
    window: Vec<usize>,
    window_sum: Vec<f64>,
}

impl HistoryBuffer {
    /// A buffer that can answer lags `0..=max_lag`. `prior_entering` is only
    /// consulted under [`Prehistory::Consistent`].
    pub fn new(max_lag: usize, edge_count: usize, prehistory: Prehistory, prior_entering: Vec<f64>) -> Self {
        assert_eq!(prior_entering.len(), edge_count);
        let capacity = max_lag + 1;
        HistoryBuffer {
            capacity,
            edge_count,
            pushed: 0,
            matching: vec![0.0; capacity * edge_count],
            hazard: vec![0.0; capacity * edge_count],
            entering: vec![0.0; capacity * edge_count],
            prior_entering,
            prehistory,
            window: Vec::new(),
            window_sum: Vec::new(),
        }
    }

    /// Tracks `sum_{j < window[e]} hazard(j, e)` incrementally. Must be called
    /// before the first push; every window must fit in the buffer.
    pub fn with_hazard_windows(mut self, window: Vec<usize>) -> Self {
        assert!(self.pushed == 0 && window.len() == self.edge_count);
        assert!(window.iter().all(|&m| m <= self.capacity));
        self.window_sum = vec![0.0; self.edge_count];
        self.window = window;
        self
    }

    pub fn max_lag(&self) -> usize {
        self.capacity - 1
    }

    pub fn len(&self) -> usize {
        self.pushed
    }

    pub fn is_empty(&self) -> bool {
        self.pushed == 0
    }

    pub fn push(&mut self, matching: &[f64], hazard: &[f64], entering: &[f64]) {
        let e = self.edge_count;
        debug_assert!(matching.len() == e && hazard.len() == e && entering.len() == e);
        if !self.window.is_empty() {
            for (i, &h) in hazard.iter().enumerate() {
                let m = self.window[i];
                self.window_sum[i] = if self.pushed == 0 {
                    m as f64 * h
                } else {
                    // The value at lag m - 1 leaves the window.
                    (self.window_sum[i] - self.hazard(m - 1, i) + h).max(0.0)
                };
            }
        }
        let slot = self.pushed % self.capacity;
        self.matching[slot * e..(slot + 1) * e].copy_from_slice(matching);
        self.hazard[slot * e..(slot + 1) * e].copy_from_slice(hazard);
        self.entering[slot * e..(slot + 1) * e].copy_from_slice(entering);
        self.pushed += 1;
    }

    /// Ring slot holding the value stored `lag` pushes ago, or `None` when
    /// that is before the first push.
    #[inline]
    fn slot(&self, lag: usize) -> Option<usize> {
        assert!(lag < self.capacity, "lag {lag} exceeds history capacity");
        assert!(
            self.pushed > 0,
            "history read before the initial state was pushed"
        );
        (lag < self.pushed).then(|| (self.pushed - 1 - lag) % self.capacity)
    }

    #[inline]
    pub fn matching(&self, lag: usize, e: usize) -> f64 {
        match (self.slot(lag), self.prehistory) {
            (Some(s), _) => self.matching[s * self.edge_count + e],
            (None, Prehistory::Consistent) => 0.0,
            (None, Prehistory::Constant) => self.matching[e],
        }
    }

    /// Hazards before the start repeat the initial hazard.
    #[inline]
    pub fn hazard(&self, lag: usize, e: usize) -> f64 {
        match self.slot(lag) {
            Some(s) => self.hazard[s * self.edge_count + e],
            None => self.hazard[e],
        }
    }

    /// Sum of the hazards at lags `0..window[e]`.
    #[inline]
    pub fn hazard_window_sum(&self, e: usize) -> f64 {
        self.window_sum[e]
    }

    #[inline]
    pub fn entering(&self, lag: usize, e: usize) -> f64 {
        match (self.slot(lag), self.prehistory) {
            (Some(s), _) => self.entering[s * self.edge_count + e],
            (None, Prehistory::Consistent) => self.prior_entering[e],
            (None, Prehistory::Constant) => self.entering[e],
        }
    }
}
