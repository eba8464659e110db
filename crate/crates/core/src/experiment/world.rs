use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::seeds::{derive_seed, Stream};
use crate::demand::DemandProfile;
use crate::error::{ExperimentError, FluidError};
use crate::fluid::{delay_steps, horizon_steps, FluidState, ScheduledArrival};
use crate::network::{EdgeId, NodeId, RoadNetwork};
use crate::strategies::{
    route_greedy, route_hotspot, route_random_walk, route_wgc, HotspotMap, StrategyKind, WgcParams,
};

/// A network and demand profile discretized at one step size, shared by
/// every trial of a campaign.
#[derive(Debug, Clone)]
pub struct Scenario {
    net: RoadNetwork,
    profile: DemandProfile,
    dt: f64,
    edge_steps: Vec<usize>,
    /// `trip_steps[e][u]`, `usize::MAX` when `u` is unreachable.
    trip_steps: Vec<Vec<usize>>,
    destinations: Vec<Option<WeightedIndex<f64>>>,
    hotspots: HotspotMap,
}

impl Scenario {
    pub fn new(net: RoadNetwork, profile: DemandProfile, dt: f64) -> Result<Self, ExperimentError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FluidError::StepSize(dt).into());
        }
        if profile.edge_count() != net.edge_count() {
            return Err(ExperimentError::Config(format!(
                "demand profile covers {} edges but the network has {}",
                profile.edge_count(),
                net.edge_count()
            )));
        }
        let edge_steps = net
            .travel_times()
            .iter()
            .map(|&tau| delay_steps(tau, dt))
            .collect::<Result<Vec<_>, _>>()?;
        let mut trip_steps = Vec::with_capacity(net.edge_count());
        let mut destinations = Vec::with_capacity(net.edge_count());
        for e in 0..net.edge_count() {
            let row = net.destination_row(e);
            let steps = (0..net.node_count())
                .map(|u| {
                    if row[u] > 0.0 {
                        delay_steps(net.trip_time(e, u), dt)
                    } else {
                        Ok(usize::MAX)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            trip_steps.push(steps);
            destinations.push(WeightedIndex::new(row).ok());
        }
        let hotspots = HotspotMap::new(&net, &profile);
        Ok(Scenario {
            net,
            profile,
            dt,
            edge_steps,
            trip_steps,
            destinations,
            hotspots,
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn profile(&self) -> &DemandProfile {
        &self.profile
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hotspots(&self) -> &HotspotMap {
        &self.hotspots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriverStatus {
    AtNode(NodeId),
    /// Idle and cruising along the edge.
    OnEdge(EdgeId),
    /// Carrying a passenger towards the node.
    Occupied(NodeId),
}

#[derive(Debug, Clone)]
struct Driver {
    status: DriverStatus,
    /// Step of the next status change.
    event_step: usize,
    version: u32,
    /// Lower wins when several idle drivers share an edge with a passenger.
    priority: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Passenger {
    arrival: f64,
    deadline: f64,
}

#[derive(Debug, Clone)]
struct ArrivalStream {
    rng: ChaCha8Rng,
    peak: f64,
    next: f64,
}

/// How the tagged driver chooses its route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedPolicy {
    pub strategy: StrategyKind,
    pub wgc: WgcParams,
}

#[derive(Debug, Clone)]
struct Tagged {
    driver: usize,
    policy: TaggedPolicy,
    rng: ChaCha8Rng,
    plan: VecDeque<EdgeId>,
    decisions: usize,
    plans: usize,
}

/// Audit trail of one world. Times are seconds; `step` is the simulation
/// step at which the event was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Spawn {
        edge: EdgeId,
        arrival: f64,
        patience: f64,
    },
    Abandon {
        edge: EdgeId,
        arrival: f64,
        deadline: f64,
        step: usize,
    },
    Match {
        edge: EdgeId,
        driver: usize,
        arrival: f64,
        step: usize,
    },
    TaggedEnters {
        edge: EdgeId,
        step: usize,
    },
}

/// Driver counts by state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census {
    pub idle_on_edges: usize,
    pub idle_at_nodes: usize,
    pub occupied: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.idle_on_edges + self.idle_at_nodes + self.occupied
    }
}

/// Passenger counts by fate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PassengerCounts {
    pub spawned: usize,
    pub matched: usize,
    pub abandoned: usize,
    pub waiting: usize,
}

/// Time-stepped agent simulation of passengers, a background fleet and at
/// most one tagged driver.
///
/// Every step `k` (time `k dt`) applies, in order: driver arrivals and
/// departures due at `k`, passenger arrivals in `((k-1) dt, k dt]`,
/// abandonments with deadline at or before `k dt`, and matching on every edge
/// holding both idle drivers and waiting passengers.
#[derive(Debug, Clone)]
pub struct AgentWorld<'a> {
    scenario: &'a Scenario,
    seed: u64,
    step: usize,
    last_step: usize,
    started: bool,
    drivers: Vec<Driver>,
    calendar: Vec<Vec<(usize, u32)>>,
    idle_on: Vec<Vec<usize>>,
    waiting: Vec<VecDeque<Passenger>>,
    arrivals: Vec<ArrivalStream>,
    tagged: Option<Tagged>,
    allocation: Option<f64>,
    passengers: PassengerCounts,
    log: Option<Vec<WorldEvent>>,
}

impl<'a> AgentWorld<'a> {
    /// An empty world running over `[0, horizon]`. All randomness derives
    /// from `seed` through per-edge and per-driver streams.
    pub fn new(scenario: &'a Scenario, horizon: f64, seed: u64) -> Result<Self, ExperimentError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ExperimentError::Config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let net = &scenario.net;
        let last_step = horizon_steps(horizon, scenario.dt);
        let arrivals = (0..net.edge_count())
            .map(|e| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[Stream::Arrivals as u64, e as u64]));
                let peak = scenario.profile.peak_rate(e);
                let next = if peak > 0.0 {
                    sample_exp(&mut rng, peak)
                } else {
                    f64::INFINITY
                };
                ArrivalStream { rng, peak, next }
            })
            .collect();
        Ok(AgentWorld {
            scenario,
            seed,
            step: 0,
            last_step,
            started: false,
            drivers: Vec::new(),
            calendar: vec![Vec::new(); last_step + 1],
            idle_on: vec![Vec::new(); net.edge_count()],
            waiting: vec![VecDeque::new(); net.edge_count()],
            arrivals,
            tagged: None,
            allocation: None,
            passengers: PassengerCounts::default(),
            log: None,
        })
    }

    /// Starts recording a [`WorldEvent`] log.
    pub fn record_events(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> Option<&[WorldEvent]> {
        self.log.as_deref()
    }

    pub fn take_events(&mut self) -> Option<Vec<WorldEvent>> {
        self.log.take()
    }

    fn new_driver(&mut self, status: DriverStatus, priority: u64) -> usize {
        let id = self.drivers.len();
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[Stream::Driver as u64, id as u64]));
        self.drivers.push(Driver {
            status,
            event_step: 0,
            version: 0,
            priority,
            rng,
        });
        id
    }

    fn check_node(&self, node: NodeId) -> Result<(), ExperimentError> {
        if node >= self.scenario.net.node_count() {
            return Err(ExperimentError::Config(format!(
                "node {node} is not in the network"
            )));
        }
        Ok(())
    }

    fn check_edge(&self, edge: EdgeId) -> Result<(), ExperimentError> {
        if edge >= self.scenario.net.edge_count() {
            return Err(ExperimentError::Config(format!(
                "edge {edge} is not in the network"
            )));
        }
        Ok(())
    }

    fn check_unstarted(&self) -> Result<(), ExperimentError> {
        if self.started {
            return Err(ExperimentError::Config("world already started".into()));
        }
        Ok(())
    }

    /// Adds an idle background driver at `node`; it leaves after an
    /// exponential wait.
    pub fn add_background_at_node(&mut self, node: NodeId) -> Result<usize, ExperimentError> {
        self.check_unstarted()?;
        self.check_node(node)?;
        let priority = 2 * self.drivers.len() as u64 + 1;
        let id = self.new_driver(DriverStatus::AtNode(node), priority);
        self.schedule_departure(id, node, 0);
        Ok(id)
    }

    /// Adds an idle background driver that has just entered `edge`.
    pub fn add_background_on_edge(&mut self, edge: EdgeId) -> Result<usize, ExperimentError> {
        self.check_unstarted()?;
        self.check_edge(edge)?;
        let priority = 2 * self.drivers.len() as u64 + 1;
        let id = self.new_driver(DriverStatus::OnEdge(edge), priority);
        self.enter_edge(id, edge, 0);
        Ok(id)
    }

    /// Adds the tagged driver at `node`. `rank` in `0..=background count`
    /// is its position in the matching order among background drivers.
    pub fn add_tagged(
        &mut self,
        node: NodeId,
        rank: usize,
        policy: TaggedPolicy,
    ) -> Result<usize, ExperimentError> {
        self.check_unstarted()?;
        self.check_node(node)?;
        if self.tagged.is_some() {
            return Err(ExperimentError::Config(
                "world already has a tagged driver".into(),
            ));
        }
        let id = self.new_driver(DriverStatus::AtNode(node), 2 * rank as u64);
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[Stream::TaggedRoute as u64]));
        self.tagged = Some(Tagged {
            driver: id,
            policy,
            rng,
            plan: VecDeque::new(),
            decisions: 0,
            plans: 0,
        });
        Ok(id)
    }

    /// Places a passenger on `edge` at time 0.
    pub fn add_passenger(&mut self, edge: EdgeId, patience: f64) -> Result<(), ExperimentError> {
        self.check_unstarted()?;
        self.check_edge(edge)?;
        self.push_passenger(edge, 0.0, patience);
        Ok(())
    }

    fn push_passenger(&mut self, edge: EdgeId, arrival: f64, patience: f64) {
        self.waiting[edge].push_back(Passenger {
            arrival,
            deadline: arrival + patience,
        });
        self.passengers.spawned += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(WorldEvent::Spawn {
                edge,
                arrival,
                patience,
            });
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn last_step(&self) -> usize {
        self.last_step
    }

    pub fn is_finished(&self) -> bool {
        self.allocation.is_some() || self.step >= self.last_step
    }

    pub fn allocation_time(&self) -> Option<f64> {
        self.allocation
    }

    pub fn driver_count(&self) -> usize {
        self.drivers.len()
    }

    pub fn status(&self, driver: usize) -> DriverStatus {
        self.drivers[driver].status
    }

    pub fn tagged_driver(&self) -> Option<usize> {
        self.tagged.as_ref().map(|t| t.driver)
    }

    /// Routing decisions and full plans made by the tagged driver.
    pub fn tagged_decisions(&self) -> (usize, usize) {
        self.tagged.as_ref().map_or((0, 0), |t| (t.decisions, t.plans))
    }

    pub fn passenger_counts(&self) -> PassengerCounts {
        PassengerCounts {
            waiting: self.waiting.iter().map(VecDeque::len).sum(),
            ..self.passengers
        }
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for d in &self.drivers {
            match d.status {
                DriverStatus::AtNode(_) => c.idle_at_nodes += 1,
                DriverStatus::OnEdge(_) => c.idle_on_edges += 1,
                DriverStatus::Occupied(_) => c.occupied += 1,
            }
        }
        c
    }

    /// Idle drivers on each edge, the tagged driver included.
    pub fn idle_on_edge_counts(&self) -> Vec<usize> {
        self.idle_on.iter().map(Vec::len).collect()
    }

    pub fn waiting_counts(&self) -> Vec<usize> {
        self.waiting.iter().map(VecDeque::len).collect()
    }

    /// The background fleet as a fluid initial state plus the pending
    /// returns of occupied drivers. The tagged driver is left out.
    pub fn fluid_snapshot(&self) -> (FluidState, Vec<ScheduledArrival>) {
        let net = &self.scenario.net;
        let dt = self.scenario.dt;
        let mut state = FluidState::zeros(net.edge_count(), net.node_count());
        for (q, w) in state.queue.iter_mut().zip(&self.waiting) {
            *q = w.len() as f64;
        }
        let tagged = self.tagged_driver();
        let mut pending: Vec<(usize, NodeId)> = Vec::new();
        for (id, d) in self.drivers.iter().enumerate() {
            if Some(id) == tagged {
                continue;
            }
            match d.status {
                DriverStatus::AtNode(u) => state.idle_at_node[u] += 1.0,
                DriverStatus::OnEdge(e) => state.idle_on_edge[e] += 1.0,
                DriverStatus::Occupied(u) => {
                    state.occupied_in_transit += 1.0;
                    pending.push((d.event_step.saturating_sub(self.step).max(1), u));
                }
            }
        }
        pending.sort_unstable();
        let mut scheduled: Vec<ScheduledArrival> = Vec::new();
        for (steps, node) in pending {
            match scheduled.last_mut() {
                Some(last) if last.node == node && last.delay == steps as f64 * dt => last.mass += 1.0,
                _ => scheduled.push(ScheduledArrival {
                    node,
                    delay: steps as f64 * dt,
                    mass: 1.0,
                }),
            }
        }
        (state, scheduled)
    }

    fn schedule(&mut self, driver: usize, step: usize) {
        let d = &mut self.drivers[driver];
        d.event_step = step;
        d.version = d.version.wrapping_add(1);
        if step <= self.last_step {
            self.calendar[step].push((driver, d.version));
        }
    }

    fn schedule_departure(&mut self, driver: usize, node: NodeId, now: usize) {
        let exit: f64 = self
            .scenario
            .net
            .out_edges(node)
            .iter()
            .map(|&e| self.scenario.net.transition(e))
            .sum();
        let d = &mut self.drivers[driver];
        d.status = DriverStatus::AtNode(node);
        if exit <= 0.0 {
            d.version = d.version.wrapping_add(1);
            d.event_step = usize::MAX;
            return;
        }
        let wait = sample_exp(&mut d.rng, exit);
        let steps = ((wait / self.scenario.dt).ceil() as usize).max(1);
        self.schedule(driver, now.saturating_add(steps));
    }

    fn enter_edge(&mut self, driver: usize, edge: EdgeId, now: usize) {
        self.drivers[driver].status = DriverStatus::OnEdge(edge);
        self.idle_on[edge].push(driver);
        self.schedule(driver, now + self.scenario.edge_steps[edge]);
    }

    fn leave_edge(&mut self, driver: usize, edge: EdgeId) {
        let list = &mut self.idle_on[edge];
        if let Some(pos) = list.iter().position(|&d| d == driver) {
            list.swap_remove(pos);
        }
    }

    fn tagged_decide(&mut self, node: NodeId) -> Result<EdgeId, ExperimentError> {
        let scenario = self.scenario;
        let t = self.time();
        let plan_needed = self.tagged.as_ref().is_some_and(|tg| tg.plan.is_empty());
        if plan_needed {
            let policy = self.tagged.as_ref().map(|tg| tg.policy).expect("tagged driver");
            let edges: Vec<EdgeId> = match policy.strategy {
                StrategyKind::Wgc => {
                    let (state, scheduled) = self.fluid_snapshot();
                    let eval = route_wgc(
                        &scenario.net,
                        &scenario.profile,
                        &state,
                        &scheduled,
                        node,
                        t,
                        &policy.wgc,
                    )?;
                    eval.path.edges().to_vec()
                }
                StrategyKind::Greedy => vec![route_greedy(&scenario.net, &scenario.profile, node, t)?],
                StrategyKind::RandomWalk => {
                    let tg = self.tagged.as_mut().expect("tagged driver");
                    vec![route_random_walk(&scenario.net, node, &mut tg.rng)?]
                }
                StrategyKind::HotspotGuided => {
                    let tg = self.tagged.as_mut().expect("tagged driver");
                    vec![route_hotspot(
                        &scenario.net,
                        &scenario.hotspots,
                        node,
                        &mut tg.rng,
                    )?]
                }
            };
            let tg = self.tagged.as_mut().expect("tagged driver");
            tg.plans += 1;
            tg.plan.extend(edges);
        }
        let tg = self.tagged.as_mut().expect("tagged driver");
        tg.decisions += 1;
        let edge = tg
            .plan
            .pop_front()
            .ok_or(ExperimentError::Config(format!("no route from node {node}")))?;
        debug_assert_eq!(scenario.net.edge(edge).tail, node);
        Ok(edge)
    }

    fn move_tagged(&mut self, node: NodeId) -> Result<(), ExperimentError> {
        let edge = self.tagged_decide(node)?;
        let driver = self.tagged_driver().expect("tagged driver");
        self.enter_edge(driver, edge, self.step);
        if let Some(log) = self.log.as_mut() {
            log.push(WorldEvent::TaggedEnters {
                edge,
                step: self.step,
            });
        }
        Ok(())
    }

    fn process_events(&mut self) -> Result<(), ExperimentError> {
        let k = self.step;
        let due = std::mem::take(&mut self.calendar[k]);
        let tagged = self.tagged_driver();
        let mut tagged_due = None;
        for (id, version) in due {
            let d = &self.drivers[id];
            if d.version != version || d.event_step != k {
                continue;
            }
            match d.status {
                DriverStatus::OnEdge(e) => {
                    self.leave_edge(id, e);
                    let head = self.scenario.net.edge(e).head;
                    if Some(id) == tagged {
                        self.drivers[id].status = DriverStatus::AtNode(head);
                        tagged_due = Some(head);
                    } else {
                        self.schedule_departure(id, head, k);
                    }
                }
                DriverStatus::AtNode(u) => {
                    let net = &self.scenario.net;
                    let d = &mut self.drivers[id];
                    let edge = *net
                        .out_edges(u)
                        .choose_weighted(&mut d.rng, |&e| net.transition(e))
                        .expect("departure scheduled only from nodes with exits");
                    self.enter_edge(id, edge, k);
                }
                DriverStatus::Occupied(u) => self.schedule_departure(id, u, k),
            }
        }
        if let Some(node) = tagged_due {
            self.move_tagged(node)?;
        }
        Ok(())
    }

    fn spawn_passengers(&mut self) {
        let t = self.time();
        let mu = self.scenario.profile.abandonment_rate();
        for e in 0..self.arrivals.len() {
            loop {
                let s = &mut self.arrivals[e];
                if s.next > t {
                    break;
                }
                let candidate = s.next;
                let rate = self.scenario.profile.evaluate(e, candidate);
                let accept = s.rng.random::<f64>() * s.peak < rate;
                let patience = if accept {
                    Some(sample_exp(&mut s.rng, mu))
                } else {
                    None
                };
                s.next = candidate + sample_exp(&mut s.rng, s.peak);
                if let Some(patience) = patience {
                    self.push_passenger(e, candidate, patience);
                }
            }
        }
    }

    fn abandon_passengers(&mut self) {
        let t = self.time();
        let k = self.step;
        for (e, queue) in self.waiting.iter_mut().enumerate() {
            if queue.is_empty() {
                continue;
            }
            let log = &mut self.log;
            let abandoned = &mut self.passengers.abandoned;
            queue.retain(|p| {
                if p.deadline <= t {
                    *abandoned += 1;
                    if let Some(log) = log.as_mut() {
                        log.push(WorldEvent::Abandon {
                            edge: e,
                            arrival: p.arrival,
                            deadline: p.deadline,
                            step: k,
                        });
                    }
                    false
                } else {
                    true
                }
            });
        }
    }

    fn match_passengers(&mut self) {
        let k = self.step;
        let tagged = self.tagged_driver();
        for e in 0..self.waiting.len() {
            while !self.waiting[e].is_empty() && !self.idle_on[e].is_empty() {
                let list = &self.idle_on[e];
                let (pos, &driver) = list
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &d)| self.drivers[d].priority)
                    .expect("non-empty");
                self.idle_on[e].swap_remove(pos);
                let passenger = self.waiting[e].pop_front().expect("non-empty");
                self.passengers.matched += 1;
                if let Some(log) = self.log.as_mut() {
                    log.push(WorldEvent::Match {
                        edge: e,
                        driver,
                        arrival: passenger.arrival,
                        step: k,
                    });
                }
                if Some(driver) == tagged {
                    self.allocation = Some(self.time());
                    self.drivers[driver].status = DriverStatus::Occupied(self.scenario.net.edge(e).head);
                    self.drivers[driver].event_step = usize::MAX;
                    return;
                }
                let scenario = self.scenario;
                let dest = match &scenario.destinations[e] {
                    Some(dist) => dist.sample(&mut self.drivers[driver].rng),
                    None => scenario.net.edge(e).head,
                };
                let steps = scenario.trip_steps[e][dest].max(1);
                self.drivers[driver].status = DriverStatus::Occupied(dest);
                self.schedule(driver, k.saturating_add(steps));
            }
        }
    }

    /// Places the tagged driver on its first edge and matches at time 0.
    fn start(&mut self) -> Result<(), ExperimentError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        if let Some(id) = self.tagged_driver() {
            if let DriverStatus::AtNode(node) = self.drivers[id].status {
                self.move_tagged(node)?;
            }
        }
        self.process_events()?;
        self.match_passengers();
        Ok(())
    }

    /// Advances one step. Returns `false` once the world is finished.
    pub fn advance(&mut self) -> Result<bool, ExperimentError> {
        if !self.started {
            self.start()?;
            return Ok(!self.is_finished());
        }
        if self.is_finished() {
            return Ok(false);
        }
        self.step += 1;
        self.process_events()?;
        self.spawn_passengers();
        self.abandon_passengers();
        self.match_passengers();
        Ok(!self.is_finished())
    }

    /// Runs to the first allocation of the tagged driver or the horizon.
    pub fn run(&mut self) -> Result<Option<f64>, ExperimentError> {
        while self.advance()? {}
        Ok(self.allocation)
    }
}

fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}
