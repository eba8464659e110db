//! Time-varying passenger arrival rates per edge.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DemandError;
use crate::network::{EdgeId, RoadNetwork};

/// Multiplicative sinusoidal modulation shared by every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Sinusoid {
    pub const FLAT: Sinusoid = Sinusoid {
        amplitude: 0.0,
        period: 1.0,
        phase: 0.0,
    };

    fn validate(&self) -> Result<(), DemandError> {
        if !(0.0..1.0).contains(&self.amplitude) {
            return Err(DemandError::Amplitude(self.amplitude));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(DemandError::Period(self.period));
        }
        Ok(())
    }
}

impl Default for Sinusoid {
    fn default() -> Self {
        Sinusoid {
            amplitude: 0.3,
            period: 120.0,
            phase: 0.0,
        }
    }
}

/// Inputs to [`sample_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    pub hotspot_fraction: f64,
    pub cold_fraction: f64,
    pub base_range: (f64, f64),
    pub hotspot_rate: f64,
    pub sinusoid: Sinusoid,
    /// Draw an independent phase per edge instead of sharing `sinusoid.phase`.
    pub per_edge_phase: bool,
    pub abandonment_rate: f64,
}

impl Default for DemandParams {
    fn default() -> Self {
        DemandParams {
            hotspot_fraction: 0.1,
            cold_fraction: 0.2,
            base_range: (0.05, 0.2),
            hotspot_rate: 0.5,
            sinusoid: Sinusoid::default(),
            per_edge_phase: false,
            abandonment_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    /// Unmodulated rate `r_e` per edge (zero on cold edges).
    levels: Vec<f64>,
    hotspots: Vec<EdgeId>,
    cold: Vec<EdgeId>,
    sinusoid: Sinusoid,
    edge_phases: Option<Vec<f64>>,
    abandonment_rate: f64,
}

impl DemandProfile {
    /// Profile with explicit per-edge levels and no hotspot or cold labels.
    pub fn from_levels(
        levels: Vec<f64>,
        sinusoid: Sinusoid,
        abandonment_rate: f64,
    ) -> Result<Self, DemandError> {
        sinusoid.validate()?;
        if !(abandonment_rate.is_finite() && abandonment_rate > 0.0) {
            return Err(DemandError::AbandonmentRate(abandonment_rate));
        }
        if let Some(&bad) = levels.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(DemandError::BaseRange { lo: bad, hi: bad });
        }
        Ok(DemandProfile {
            levels,
            hotspots: Vec::new(),
            cold: Vec::new(),
            sinusoid,
            edge_phases: None,
            abandonment_rate,
        })
    }

    pub fn constant(edge_count: usize, rate: f64, abandonment_rate: f64) -> Result<Self, DemandError> {
        Self::from_levels(vec![rate; edge_count], Sinusoid::FLAT, abandonment_rate)
    }

    /// Labels `hotspots` (keeping their current level) and zeroes `cold`.
    pub fn with_labels(mut self, hotspots: Vec<EdgeId>, cold: Vec<EdgeId>) -> Result<Self, DemandError> {
        let n = self.levels.len();
        if let Some(&e) = hotspots.iter().chain(&cold).find(|&&e| e >= n) {
            return Err(DemandError::UnknownEdge(e));
        }
        let overlap = hotspots.iter().filter(|e| cold.contains(e)).count();
        if overlap > 0 {
            return Err(DemandError::Overlap(overlap));
        }
        for &e in &cold {
            self.levels[e] = 0.0;
        }
        self.hotspots = hotspots;
        self.hotspots.sort_unstable();
        self.hotspots.dedup();
        self.cold = cold;
        self.cold.sort_unstable();
        self.cold.dedup();
        Ok(self)
    }

    pub fn edge_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, e: EdgeId) -> f64 {
        self.levels[e]
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn hotspots(&self) -> &[EdgeId] {
        &self.hotspots
    }

    pub fn cold_edges(&self) -> &[EdgeId] {
        &self.cold
    }

    pub fn is_hotspot(&self, e: EdgeId) -> bool {
        self.hotspots.binary_search(&e).is_ok()
    }

    pub fn is_cold(&self, e: EdgeId) -> bool {
        self.cold.binary_search(&e).is_ok()
    }

    pub fn sinusoid(&self) -> Sinusoid {
        self.sinusoid
    }

    /// Passenger abandonment rate `mu`.
    pub fn abandonment_rate(&self) -> f64 {
        self.abandonment_rate
    }

    /// Arrival rate `lambda_e(t)` in passengers per second.
    pub fn evaluate(&self, e: EdgeId, t: f64) -> f64 {
        let level = self.levels[e];
        if level == 0.0 {
            return 0.0;
        }
        let s = &self.sinusoid;
        let phase = self.edge_phases.as_ref().map_or(s.phase, |p| p[e]);
        (level * (1.0 + s.amplitude * (TAU * t / s.period + phase).sin())).max(0.0)
    }

    /// Upper bound on `evaluate(e, t)` over all `t`, used for thinning.
    pub fn peak_rate(&self, e: EdgeId) -> f64 {
        self.levels[e] * (1.0 + self.sinusoid.amplitude)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}

/// Labels hotspot and cold edges uniformly at random and draws base rates.
pub fn sample_profile(
    net: &RoadNetwork,
    params: &DemandParams,
    seed: u64,
) -> Result<DemandProfile, DemandError> {
    let DemandParams {
        hotspot_fraction: hot,
        cold_fraction: cold,
        base_range: (lo, hi),
        hotspot_rate,
        sinusoid,
        per_edge_phase,
        abandonment_rate,
    } = *params;
    if !(hot >= 0.0 && cold >= 0.0 && hot + cold <= 1.0 + 1e-12) {
        return Err(DemandError::Fractions { hotspot: hot, cold });
    }
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(DemandError::BaseRange { lo, hi });
    }
    if !(hotspot_rate >= hi && hotspot_rate.is_finite()) {
        return Err(DemandError::HotspotRate {
            rate: hotspot_rate,
            hi,
        });
    }
    sinusoid.validate()?;
    if !(abandonment_rate.is_finite() && abandonment_rate > 0.0) {
        return Err(DemandError::AbandonmentRate(abandonment_rate));
    }

    let n = net.edge_count();
    let n_hot = (hot * n as f64).round() as usize;
    let n_cold = (cold * n as f64).round() as usize;
    if n_hot + n_cold > n {
        return Err(DemandError::Overlap(n_hot + n_cold - n));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<EdgeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut hotspots = order[..n_hot].to_vec();
    let mut cold_edges = order[n_hot..n_hot + n_cold].to_vec();
    hotspots.sort_unstable();
    cold_edges.sort_unstable();

    let mut levels = vec![0.0; n];
    // Base rates are drawn in edge order so the labels alone decide which
    // edges consume a draw.
    for (e, level) in levels.iter_mut().enumerate() {
        if hotspots.binary_search(&e).is_ok() {
            *level = hotspot_rate;
        } else if cold_edges.binary_search(&e).is_err() {
            *level = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
    }
    let edge_phases = per_edge_phase.then(|| (0..n).map(|_| rng.random_range(0.0..TAU)).collect());

    Ok(DemandProfile {
        levels,
        hotspots,
        cold: cold_edges,
        sinusoid,
        edge_phases,
        abandonment_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(hot: f64, cold: f64) -> DemandParams {
        DemandParams {
            hotspot_fraction: hot,
            cold_fraction: cold,
            ..DemandParams::default()
        }
    }

    #[test]
    fn all_cold_profile_is_silent() {
        let net = build_grid(3, 3, 1.0).unwrap();
        let p = sample_profile(&net, &params(0.0, 1.0), 1).unwrap();
        for e in 0..net.edge_count() {
            for t in [0.0, 13.7, 60.0, 599.9] {
                assert_eq!(p.evaluate(e, t), 0.0);
            }
        }
    }

    #[test]
    fn degenerate_uniform_range_is_constant() {
        let net = build_grid(3, 3, 1.0).unwrap();
        let p = sample_profile(
            &net,
            &DemandParams {
                hotspot_fraction: 0.0,
                cold_fraction: 0.0,
                base_range: (0.2, 0.2),
                sinusoid: Sinusoid {
                    amplitude: 0.0,
                    ..Sinusoid::default()
                },
                ..DemandParams::default()
            },
            5,
        )
        .unwrap();
        for e in 0..net.edge_count() {
            assert_eq!(p.evaluate(e, 0.0), 0.2);
            assert_eq!(p.evaluate(e, 77.0), 0.2);
        }
    }

    #[test]
    fn hotspot_count_and_determinism() {
        let net = build_grid(10, 10, 1.0).unwrap();
        let a = sample_profile(&net, &params(0.1, 0.0), 42).unwrap();
        let b = sample_profile(&net, &params(0.1, 0.0), 42).unwrap();
        assert_eq!(a.hotspots().len(), 36);
        assert_eq!(a, b);
        let c = sample_profile(&net, &params(0.1, 0.0), 43).unwrap();
        assert_ne!(a.hotspots(), c.hotspots());
    }

    #[test]
    fn sinusoid_peak_and_flat() {
        let p = DemandProfile::from_levels(
            vec![1.0],
            Sinusoid {
                amplitude: 0.5,
                period: 40.0,
                phase: 0.0,
            },
            0.1,
        )
        .unwrap();
        assert_abs_diff_eq!(p.evaluate(0, 10.0), 1.5, epsilon = 1e-12);
        let flat = DemandProfile::constant(1, 1.0, 0.1).unwrap();
        assert_eq!(flat.evaluate(0, 3.3), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let net = build_grid(3, 3, 1.0).unwrap();
        assert!(matches!(
            sample_profile(&net, &params(0.7, 0.5), 1),
            Err(DemandError::Fractions { .. })
        ));
        let mut p = params(0.1, 0.1);
        p.hotspot_rate = 0.1;
        assert!(matches!(
            sample_profile(&net, &p, 1),
            Err(DemandError::HotspotRate { .. })
        ));
        let mut p = params(0.1, 0.1);
        p.sinusoid.amplitude = 1.0;
        assert!(sample_profile(&net, &p, 1).is_err());
        let mut p = params(0.1, 0.1);
        p.abandonment_rate = 0.0;
        assert!(sample_profile(&net, &p, 1).is_err());
    }

    #[test]
    fn labels_are_disjoint_and_cold_is_zero() {
        let net = build_grid(6, 6, 1.0).unwrap();
        let p = sample_profile(&net, &params(0.3, 0.4), 11).unwrap();
        for e in p.hotspots() {
            assert!(!p.is_cold(*e));
            assert_eq!(p.level(*e), 0.5);
        }
        for e in p.cold_edges() {
            assert_eq!(p.level(*e), 0.0);
        }
    }

    #[test]
    fn period_average_equals_level() {
        let p = DemandProfile::from_levels(
            vec![0.13],
            Sinusoid {
                amplitude: 0.9,
                period: 120.0,
                phase: 0.4,
            },
            0.1,
        )
        .unwrap();
        // Composite Simpson over one period.
        let n = 20_000;
        let h = 120.0 / n as f64;
        let mut sum = p.evaluate(0, 0.0) + p.evaluate(0, 120.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * p.evaluate(0, i as f64 * h);
        }
        let mean = sum * h / 3.0 / 120.0;
        assert_abs_diff_eq!(mean, 0.13, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn rates_stay_within_envelope(seed in 0u64..500, t in 0.0f64..600.0, amp in 0.0f64..0.99) {
            let net = build_grid(4, 4, 1.0).unwrap();
            let mut p = params(0.2, 0.2);
            p.sinusoid.amplitude = amp;
            p.per_edge_phase = seed % 2 == 0;
            let profile = sample_profile(&net, &p, seed).unwrap();
            for e in 0..net.edge_count() {
                let r = profile.evaluate(e, t);
                prop_assert!(r >= 0.0);
                prop_assert!(r <= profile.level(e) * (1.0 + amp) + 1e-12);
                if profile.is_cold(e) {
                    prop_assert_eq!(r, 0.0);
                }
            }
        }
    }
}
