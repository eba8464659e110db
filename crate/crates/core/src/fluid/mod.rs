//! Fluid forecast of passenger queues and idle drivers.
//!
//! The state evolves under three coupled delay equations integrated by
//! forward Euler on a fixed grid `t_k = k * dt`:
//!
//! * queue: `Q' = Q + dt (lambda - A - mu Q)`
//! * idle drivers on edge `(u, v)`:
//!   `D' = D + dt (P_u Q_uv - A - P_u(t - tau_e) Q_uv G_uv)`
//! * idle drivers at node `u`:
//!   `P' = P + dt (sum_e R_eu A_e(t - tau_eu) - P_u sum_v Q_uv + sum_w P_w(t - tau_wu) Q_wu G_wu)`
//!
//! with `A = min(D, Q)` and `G` the survival of a cohort over the edge
//! traversal window. Occupied drivers are tracked as one aggregate mass that
//! gains every allocation and loses every delayed return.

mod history;
mod trajectory;

pub use history::{HistoryBuffer, Prehistory};
pub use trajectory::{
    read_aggregate, read_columnar, AggregateRow, ColumnarRow, FluidTrajectory, ForecastSeries, MassTotals,
};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::demand::DemandProfile;
use crate::error::{DemandError, FluidError};
use crate::network::{EdgeId, NodeId, RoadNetwork};

pub const DEFAULT_EPS_D: f64 = 1e-9;

/// Instantaneous matching rate on an edge, `min(D, Q)`.
#[inline]
pub fn matching_rate(idle: f64, queue: f64) -> f64 {
    idle.min(queue)
}

/// Per-driver allocation hazard `A / D`; zero when `D <= eps_d`.
#[inline]
pub fn hazard(matching: f64, idle: f64, eps_d: f64) -> f64 {
    if idle > eps_d {
        matching / idle
    } else {
        0.0
    }
}

/// Hazard `min(D, Q) / D` evaluated from the edge state, using its limit as
/// `D -> 0`: one while passengers are waiting, zero otherwise.
#[inline]
pub fn allocation_hazard(idle: f64, queue: f64, eps_d: f64) -> f64 {
    if idle > eps_d {
        matching_rate(idle, queue) / idle
    } else if queue > eps_d {
        1.0
    } else {
        0.0
    }
}

/// Probability of staying unmatched through consecutive steps with the given
/// hazards, `exp(-sum(h) dt)`.
#[inline]
pub fn survival_over_window(hazards: &[f64], dt: f64) -> f64 {
    (-hazards.iter().sum::<f64>() * dt).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub queue: Vec<f64>,
    pub idle_on_edge: Vec<f64>,
    pub idle_at_node: Vec<f64>,
    pub occupied_in_transit: f64,
}

impl FluidState {
    pub fn zeros(edge_count: usize, node_count: usize) -> Self {
        FluidState {
            queue: vec![0.0; edge_count],
            idle_on_edge: vec![0.0; edge_count],
            idle_at_node: vec![0.0; node_count],
            occupied_in_transit: 0.0,
        }
    }

    /// All drivers idle at nodes with the given counts, no waiting passengers.
    pub fn idle_at_nodes(net: &RoadNetwork, counts: &[u32]) -> Self {
        let mut s = FluidState::zeros(net.edge_count(), net.node_count());
        for (p, &c) in s.idle_at_node.iter_mut().zip(counts) {
            *p = c as f64;
        }
        s
    }

    pub fn total_drivers(&self) -> f64 {
        self.idle_on_edge.iter().sum::<f64>()
            + self.idle_at_node.iter().sum::<f64>()
            + self.occupied_in_transit
    }

    fn validate(&self, net: &RoadNetwork) -> Result<(), FluidError> {
        let checks: [(&'static str, usize, usize); 3] = [
            ("queue", net.edge_count(), self.queue.len()),
            ("idle_on_edge", net.edge_count(), self.idle_on_edge.len()),
            ("idle_at_node", net.node_count(), self.idle_at_node.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(FluidError::Shape {
                    what,
                    expected,
                    found,
                });
            }
        }
        let series: [(&'static str, &[f64]); 3] = [
            ("queue", &self.queue),
            ("idle_on_edge", &self.idle_on_edge),
            ("idle_at_node", &self.idle_at_node),
        ];
        for (what, values) in series {
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(FluidError::NegativeMass(what));
            }
        }
        if !(self.occupied_in_transit.is_finite() && self.occupied_in_transit >= 0.0) {
            return Err(FluidError::NegativeMass("occupied_in_transit"));
        }
        Ok(())
    }

    /// Clamps every component at zero and returns the mass added.
    fn clamp(&mut self) -> f64 {
        let mut added = 0.0;
        let mut fix = |v: &mut f64| {
            if *v < 0.0 {
                added -= *v;
                *v = 0.0;
            }
        };
        self.queue.iter_mut().for_each(&mut fix);
        self.idle_on_edge.iter_mut().for_each(&mut fix);
        self.idle_at_node.iter_mut().for_each(&mut fix);
        fix(&mut self.occupied_in_transit);
        added
    }
}

/// Mass already counted in `occupied_in_transit` that lands idle at `node`
/// after `delay` seconds. Used to seed forecasts from a running system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledArrival {
    pub node: NodeId,
    pub delay: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidSettings {
    pub dt: f64,
    pub eps_d: f64,
    /// Absolute time of step 0, used when evaluating arrival rates.
    pub start_time: f64,
    pub prehistory: Prehistory,
}

impl FluidSettings {
    pub fn new(dt: f64) -> Self {
        FluidSettings {
            dt,
            eps_d: DEFAULT_EPS_D,
            start_time: 0.0,
            prehistory: Prehistory::default(),
        }
    }
}

/// Number of whole steps in `delay`, or an error when `delay` is not an
/// integer multiple of `dt`.
pub fn delay_steps(delay: f64, dt: f64) -> Result<usize, FluidError> {
    let steps = (delay / dt).round();
    if steps < 1.0 || (steps * dt - delay).abs() > 1e-9 * delay.max(1.0) {
        return Err(FluidError::DelayNotMultiple { delay, dt });
    }
    Ok(steps as usize)
}

/// Number of steps in `floor(horizon / dt)`, tolerant of representation error.
pub fn horizon_steps(horizon: f64, dt: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize
}

#[derive(Debug, Clone)]
struct ReturnSource {
    edge: EdgeId,
    probability: f64,
    lag: usize,
}

/// Discretized fluid system bound to one network and demand profile.
#[derive(Debug, Clone)]
pub struct FluidModel<'a> {
    net: &'a RoadNetwork,
    profile: &'a DemandProfile,
    settings: FluidSettings,
    edge_steps: Vec<usize>,
    /// Exit rate `sum_v Q_uv` of each node.
    node_exit: Vec<f64>,
    returns: Vec<Vec<ReturnSource>>,
    max_lag: usize,
}

impl<'a> FluidModel<'a> {
    /// Validates the step size against every travel delay in use.
    pub fn new(
        net: &'a RoadNetwork,
        profile: &'a DemandProfile,
        settings: FluidSettings,
    ) -> Result<Self, FluidError> {
        let dt = settings.dt;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FluidError::StepSize(dt));
        }
        if profile.edge_count() != net.edge_count() {
            return Err(DemandError::EdgeCount {
                expected: net.edge_count(),
                found: profile.edge_count(),
            }
            .into());
        }
        let edge_steps = net
            .travel_times()
            .iter()
            .map(|&tau| delay_steps(tau, dt))
            .collect::<Result<Vec<_>, _>>()?;
        let mut returns = vec![Vec::new(); net.node_count()];
        for e in 0..net.edge_count() {
            for (u, &p) in net.destination_row(e).iter().enumerate() {
                if p > 0.0 {
                    let lag = delay_steps(net.trip_time(e, u), dt)?;
                    returns[u].push(ReturnSource {
                        edge: e,
                        probability: p,
                        lag,
                    });
                }
            }
        }
        let node_exit = (0..net.node_count())
            .map(|u| net.out_edges(u).iter().map(|&e| net.transition(e)).sum())
            .collect();
        let max_lag = returns
            .iter()
            .flatten()
            .map(|r| r.lag)
            .chain(edge_steps.iter().copied())
            .max()
            .unwrap_or(1);
        Ok(FluidModel {
            net,
            profile,
            settings,
            edge_steps,
            node_exit,
            returns,
            max_lag,
        })
    }

    pub fn settings(&self) -> &FluidSettings {
        &self.settings
    }

    /// Longest delay in steps; the history must reach this far back.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// An empty history whose prehistory is derived from `initial`.
    pub fn new_history(&self, initial: &FluidState) -> HistoryBuffer {
        let prior = initial
            .idle_on_edge
            .iter()
            .zip(self.net.travel_times())
            .map(|(d, tau)| d / tau)
            .collect();
        HistoryBuffer::new(
            self.max_lag,
            self.net.edge_count(),
            self.settings.prehistory,
            prior,
        )
        .with_hazard_windows(self.edge_steps.clone())
    }

    /// Pushes the allocations, hazards and edge entry flows of `state`.
    pub fn record(&self, state: &FluidState, history: &mut HistoryBuffer) {
        let eps = self.settings.eps_d;
        let matching: Vec<f64> = state
            .idle_on_edge
            .iter()
            .zip(&state.queue)
            .map(|(&d, &q)| matching_rate(d, q))
            .collect();
        let hazards: Vec<f64> = state
            .idle_on_edge
            .iter()
            .zip(&state.queue)
            .map(|(&d, &q)| allocation_hazard(d, q, eps))
            .collect();
        let entering: Vec<f64> = self
            .net
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| state.idle_at_node[edge.tail] * self.net.transition(e))
            .collect();
        history.push(&matching, &hazards, &entering);
    }

    /// One forward-Euler step from `state` at step `k`. `history` must already
    /// hold `state` at lag 0. The result is not clamped.
    pub fn step(&self, state: &FluidState, history: &HistoryBuffer, k: usize) -> FluidState {
        let net = self.net;
        let dt = self.settings.dt;
        let t = self.settings.start_time + k as f64 * dt;
        let mu = self.profile.abandonment_rate();
        let mut next = state.clone();
        let mut departures = 0.0;

        for (e, edge) in net.edges().iter().enumerate() {
            let q = state.queue[e];
            let d = state.idle_on_edge[e];
            let a = matching_rate(d, q);
            departures += a;
            let lambda = self.profile.evaluate(e, t);
            next.queue[e] = q + dt * (lambda - a - mu * q);

            let m = self.edge_steps[e];
            let survival = (-history.hazard_window_sum(e) * dt).exp();
            let entering = state.idle_at_node[edge.tail] * net.transition(e);
            let exiting = history.entering(m, e) * survival;
            next.idle_on_edge[e] = d + dt * (entering - a - exiting);
            next.idle_at_node[edge.head] += dt * exiting;
        }

        let mut returned = 0.0;
        for (u, sources) in self.returns.iter().enumerate() {
            let inflow: f64 = sources
                .iter()
                .map(|r| r.probability * history.matching(r.lag, r.edge))
                .sum();
            returned += inflow;
            next.idle_at_node[u] += dt * (inflow - state.idle_at_node[u] * self.node_exit[u]);
        }
        next.occupied_in_transit += dt * (departures - returned);
        next
    }

    /// Integrates from `initial` over `[0, horizon]`.
    pub fn integrate(&self, initial: &FluidState, horizon: f64) -> Result<FluidTrajectory, FluidError> {
        self.integrate_with_arrivals(initial, &[], horizon)
    }

    /// As [`integrate`](Self::integrate), additionally releasing each
    /// scheduled arrival from the in-transit mass into its node.
    pub fn integrate_with_arrivals(
        &self,
        initial: &FluidState,
        scheduled: &[ScheduledArrival],
        horizon: f64,
    ) -> Result<FluidTrajectory, FluidError> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(FluidError::Horizon(horizon));
        }
        initial.validate(self.net)?;
        let dt = self.settings.dt;
        let n_steps = horizon_steps(horizon, dt);
        let mut pulses: Vec<(usize, NodeId, f64)> = Vec::with_capacity(scheduled.len());
        let mut scheduled_mass = 0.0;
        for s in scheduled {
            if s.node >= self.net.node_count() {
                return Err(FluidError::UnknownNode(s.node));
            }
            if !(s.mass.is_finite() && s.mass >= 0.0 && s.delay.is_finite()) {
                return Err(FluidError::NegativeMass("scheduled arrival"));
            }
            scheduled_mass += s.mass;
            let step = ((s.delay / dt) - 1e-9).ceil().max(1.0) as usize;
            pulses.push((step, s.node, s.mass));
        }
        if scheduled_mass > initial.occupied_in_transit * (1.0 + 1e-12) + 1e-12 {
            return Err(FluidError::ScheduledExceedsTransit {
                scheduled: scheduled_mass,
                in_transit: initial.occupied_in_transit,
            });
        }
        pulses.sort_by_key(|p| p.0);

        let e_count = self.net.edge_count();
        let v_count = self.net.node_count();
        let rows = n_steps + 1;
        let mut traj = FluidTrajectory {
            dt,
            horizon,
            start_time: self.settings.start_time,
            eps_d: self.settings.eps_d,
            edge_count: e_count,
            node_count: v_count,
            queue: Vec::with_capacity(rows * e_count),
            idle_on_edge: Vec::with_capacity(rows * e_count),
            matching: Vec::with_capacity(rows * e_count),
            idle_at_node: Vec::with_capacity(rows * v_count),
            occupied: Vec::with_capacity(rows),
            clamped: Vec::with_capacity(rows),
        };
        let store = |traj: &mut FluidTrajectory, s: &FluidState, clamped: f64| {
            traj.queue.extend_from_slice(&s.queue);
            traj.idle_on_edge.extend_from_slice(&s.idle_on_edge);
            traj.matching.extend(
                s.idle_on_edge
                    .iter()
                    .zip(&s.queue)
                    .map(|(&d, &q)| matching_rate(d, q)),
            );
            traj.idle_at_node.extend_from_slice(&s.idle_at_node);
            traj.occupied.push(s.occupied_in_transit);
            traj.clamped.push(clamped);
        };

        let mut history = self.new_history(initial);
        let mut state = initial.clone();
        self.record(&state, &mut history);
        store(&mut traj, &state, 0.0);
        let mut pulse_iter = pulses.iter().peekable();
        let mut total_clamped = 0.0;
        for k in 0..n_steps {
            let mut next = self.step(&state, &history, k);
            while let Some(&&(step, node, mass)) = pulse_iter.peek() {
                if step > k + 1 {
                    break;
                }
                next.idle_at_node[node] += mass;
                next.occupied_in_transit -= mass;
                pulse_iter.next();
            }
            let clamped = next.clamp();
            total_clamped += clamped;
            self.record(&next, &mut history);
            store(&mut traj, &next, clamped);
            state = next;
        }
        if total_clamped > 0.0 {
            debug!("fluid integration clamped {total_clamped:.3e} mass over {n_steps} steps");
        }
        Ok(traj)
    }
}

/// Largest deviation of the total driver mass from `drivers` over the
/// trajectory.
pub fn conservation_error(traj: &FluidTrajectory, drivers: f64) -> f64 {
    (0..traj.steps())
        .map(|k| (traj.totals(k).total() - drivers).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_grid, RoadNetwork};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single_edge() -> RoadNetwork {
        RoadNetwork::new(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn matching_and_hazard_examples() {
        assert_eq!(matching_rate(3.0, 5.0), 3.0);
        assert_eq!(matching_rate(0.0, 7.0), 0.0);
        assert_eq!(matching_rate(2.5, 2.5), 2.5);
        assert_eq!(hazard(2.0, 4.0, 1e-9), 0.5);
        assert_eq!(hazard(0.0, 5.0, 1e-9), 0.0);
        assert_eq!(hazard(1.0, 0.0, 1e-9), 0.0);
    }

    #[test]
    fn allocation_hazard_limit() {
        assert_eq!(allocation_hazard(0.0, 2.0, 1e-9), 1.0);
        assert_eq!(allocation_hazard(1e-12, 2.0, 1e-9), 1.0);
        assert_eq!(allocation_hazard(0.0, 0.0, 1e-9), 0.0);
        assert_eq!(allocation_hazard(4.0, 1.0, 1e-9), 0.25);
        // Continuous across eps_d while passengers wait.
        assert_eq!(allocation_hazard(2e-9, 1.0, 1e-9), 1.0);
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_over_window(&[0.0; 17], 0.3), 1.0);
        assert_abs_diff_eq!(
            survival_over_window(&[0.1; 100], 0.1),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            survival_over_window(&[0.5], 2.0),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn null_system_is_a_fixed_point() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.0, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.1)).unwrap();
        let state = FluidState::zeros(net.edge_count(), net.node_count());
        let mut history = model.new_history(&state);
        model.record(&state, &mut history);
        assert_eq!(model.step(&state, &history, 0), state);
    }

    #[test]
    fn single_euler_step_of_queue() {
        let net = single_edge();
        let profile = DemandProfile::constant(1, 2.0, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.5)).unwrap();
        let state = FluidState::zeros(1, 2);
        let mut history = model.new_history(&state);
        model.record(&state, &mut history);
        let next = model.step(&state, &history, 0);
        assert_eq!(next.queue[0], 1.0);
    }

    #[test]
    fn queue_relaxes_to_arrival_over_abandonment() {
        let net = single_edge();
        let profile = DemandProfile::constant(1, 2.0, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.01)).unwrap();
        let traj = model.integrate(&FluidState::zeros(1, 2), 200.0).unwrap();
        let q = traj.queue(traj.steps() - 1, 0);
        assert!((q - 20.0).abs() / 20.0 < 0.01, "Q(200) = {q}");
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.2, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.1)).unwrap();
        let init = FluidState::idle_at_nodes(&net, &[1, 2, 3, 4]);
        let traj = model.integrate(&init, 0.0).unwrap();
        assert_eq!(traj.steps(), 1);
        assert_eq!(traj.idle_at_node(0, 3), 4.0);
    }

    #[test]
    fn rejects_delays_off_the_grid() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.2, 0.1).unwrap();
        let err = FluidModel::new(&net, &profile, FluidSettings::new(0.3)).unwrap_err();
        assert!(matches!(err, FluidError::DelayNotMultiple { .. }));
        assert!(FluidModel::new(&net, &profile, FluidSettings::new(0.0)).is_err());
        assert_eq!(delay_steps(10.0, 0.1).unwrap(), 100);
    }

    #[test]
    fn zero_demand_conserves_exactly() {
        let net = build_grid(3, 3, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.0, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.1)).unwrap();
        let init = FluidState::idle_at_nodes(&net, &[3, 0, 1, 4, 2, 0, 0, 5, 5]);
        let traj = model.integrate(&init, 30.0).unwrap();
        assert!(conservation_error(&traj, 20.0) < 1e-10);
        assert!((0..traj.steps()).all(|k| traj.occupied(k) == 0.0 && traj.clamped(k) == 0.0));
    }

    #[test]
    fn initial_edge_mass_drains_within_one_traversal() {
        let net = single_edge();
        let profile = DemandProfile::constant(1, 0.0, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.1)).unwrap();
        let mut init = FluidState::zeros(1, 2);
        init.idle_on_edge[0] = 5.0;
        let traj = model.integrate(&init, 2.0).unwrap();
        assert_abs_diff_eq!(traj.idle_on_edge(5, 0), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(traj.idle_on_edge(10, 0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(traj.idle_at_node(20, 1), 5.0, epsilon = 1e-12);
        assert!(conservation_error(&traj, 5.0) < 1e-12);
    }

    #[test]
    fn constant_prehistory_releases_phantom_drivers() {
        // Drivers that "entered" edges before t = 0 leave them without ever
        // having been counted, so the clamp has to invent mass.
        let net = build_grid(3, 3, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.0, 0.1).unwrap();
        let settings = FluidSettings {
            prehistory: Prehistory::Constant,
            ..FluidSettings::new(0.1)
        };
        let model = FluidModel::new(&net, &profile, settings).unwrap();
        let init = FluidState::idle_at_nodes(&net, &[3, 0, 1, 4, 2, 0, 0, 5, 5]);
        let traj = model.integrate(&init, 30.0).unwrap();
        assert!(conservation_error(&traj, 20.0) > 1.0);
    }

    #[test]
    fn scheduled_arrivals_move_transit_mass() {
        let net = build_grid(2, 2, 1.0).unwrap();
        let profile = DemandProfile::constant(net.edge_count(), 0.0, 0.1).unwrap();
        let model = FluidModel::new(&net, &profile, FluidSettings::new(0.1)).unwrap();
        let mut init = FluidState::zeros(net.edge_count(), net.node_count());
        init.occupied_in_transit = 3.0;
        let arrivals = [ScheduledArrival {
            node: 2,
            delay: 0.45,
            mass: 3.0,
        }];
        let traj = model.integrate_with_arrivals(&init, &arrivals, 1.0).unwrap();
        assert_eq!(traj.occupied(4), 3.0);
        assert_eq!(traj.occupied(5), 0.0);
        assert_eq!(traj.idle_at_node(5, 2), 3.0);
        assert!(conservation_error(&traj, 3.0) < 1e-12);

        let too_much = [ScheduledArrival {
            node: 2,
            delay: 0.45,
            mass: 4.0,
        }];
        assert!(model.integrate_with_arrivals(&init, &too_much, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn survival_is_bounded_and_monotone(
            hazards in proptest::collection::vec(0.0f64..3.0, 1..40),
            bump in 0.0f64..2.0,
            at in 0usize..40,
        ) {
            let s = survival_over_window(&hazards, 0.1);
            prop_assert!(s > 0.0 && s <= 1.0);
            let mut more = hazards.clone();
            let i = at % more.len();
            more[i] += bump;
            prop_assert!(survival_over_window(&more, 0.1) <= s);
        }

        #[test]
        fn trajectory_is_nonnegative_and_consistent(seed in 0u64..40, rate in 0.0f64..0.5) {
            let net = build_grid(2, 3, 1.0).unwrap();
            let levels: Vec<f64> = (0..net.edge_count())
                .map(|e| rate * (((e as u64 * 7 + seed) % 5) as f64) / 4.0)
                .collect();
            let profile = DemandProfile::from_levels(levels, crate::demand::Sinusoid::default(), 0.1).unwrap();
            let model = FluidModel::new(&net, &profile, FluidSettings::new(0.1)).unwrap();
            let counts: Vec<u32> = (0..6).map(|u| ((u as u64 * 13 + seed) % 7) as u32).collect();
            let traj = model.integrate(&FluidState::idle_at_nodes(&net, &counts), 20.0).unwrap();
            prop_assert_eq!(traj.steps(), 201);
            for k in 0..traj.steps() {
                for e in 0..net.edge_count() {
                    prop_assert!(traj.queue(k, e) >= 0.0);
                    prop_assert!(traj.idle_on_edge(k, e) >= 0.0);
                    prop_assert_eq!(traj.matching(k, e), traj.idle_on_edge(k, e).min(traj.queue(k, e)));
                }
                for u in 0..net.node_count() {
                    prop_assert!(traj.idle_at_node(k, u) >= 0.0);
                }
            }
        }
    }
}
