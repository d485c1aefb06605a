//! Discrete-time simulation loop.
//!
//! Each step runs, in order:
//!
//! 1. closure events and rerouting (vehicles in ascending id order);
//! 2. insertion of due departures at position 0 with speed 0;
//! 3. speed decisions for every vehicle against the leader it saw at the
//!    start of the step (synchronous update);
//! 4. movement: lane fronts that cross their edge end either arrive or ask to
//!    enter their next edge; each edge admits at most one entrant per step,
//!    ordered by (time at the node, vehicle id); losers stop at the edge end;
//! 5. metrics sampling.
//!
//! Krauss noise comes from a counter-based ChaCha stream keyed by
//! (seed, vehicle id, step), so decisions never depend on iteration order.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::demand::{TripSpec, VehicleClass};
use crate::dynamics::{idm_step, krauss_step, IdmParams, KraussParams, LeaderView};
use crate::events::{apply_events, ClosureEvent};
use crate::metrics::{
    fuel_rate, ttc, EdgeSpeedAccumulator, EmissionTotals, FuelCoefficients, JunctionPassage, SafetyCounters,
    TtcEpisode, DEFAULT_PET_THRESHOLD,
};
use crate::network::{EdgeId, Network};
use crate::routing::{plan_reroute, shortest_path, RerouteDecision, ReroutePolicy, Route, RouteProgress};

/// A stopped front vehicle closer than this to a blocked edge end snaps onto it.
const STOP_LINE_SNAP: f64 = 0.5;
const GAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("integrity fault at t={time}: {message}")]
    Integrity { time: f64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub dt: f64,
    pub end_time: f64,
    pub seed: u64,
    /// Free space (m) required behind the last vehicle of the entry lane.
    pub insertion_min_gap: f64,
    /// Halt on integrity faults instead of logging them.
    pub strict: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { dt: 1.0, end_time: 5400.0, seed: 7, insertion_min_gap: 2.5, strict: true }
    }
}

/// Car-following parameters per vehicle class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelParams {
    pub krauss: KraussParams,
    pub idm: IdmParams,
}

impl ModelParams {
    pub fn length(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Hdv => self.krauss.length,
            VehicleClass::Cav => self.idm.length,
        }
    }

    pub fn v_max(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Hdv => self.krauss.v_max,
            VehicleClass::Cav => self.idm.v_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub pet_threshold: f64,
    pub fuel: FuelCoefficients,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { pet_threshold: DEFAULT_PET_THRESHOLD, fuel: FuelCoefficients::default() }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Network,
    pub trips: Vec<TripSpec>,
    pub events: Vec<ClosureEvent>,
    pub models: ModelParams,
    pub policy: ReroutePolicy,
    pub engine: EngineConfig,
    pub metrics: MetricsConfig,
}

impl Scenario {
    pub fn new(network: Network, trips: Vec<TripSpec>) -> Self {
        Scenario {
            network,
            trips,
            events: Vec::new(),
            models: ModelParams::default(),
            policy: ReroutePolicy::default(),
            engine: EngineConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.network.is_empty() || self.network.edges().is_empty() {
            return bad("network has no nodes or edges".into());
        }
        let e = &self.engine;
        if !(e.dt > 0.0 && e.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", e.dt));
        }
        if !(e.end_time > 0.0 && e.end_time.is_finite()) {
            return bad(format!("end time must be > 0, got {}", e.end_time));
        }
        if e.insertion_min_gap < 0.0 {
            return bad("insertion gap must be >= 0".into());
        }
        self.models.krauss.validate().or_else(|err| bad(err.to_string()))?;
        self.models.idm.validate().or_else(|err| bad(err.to_string()))?;
        for ev in &self.events {
            ev.validate(&self.network).or_else(|err| bad(err.to_string()))?;
        }
        let mut ids = std::collections::HashSet::new();
        for t in &self.trips {
            if !ids.insert(t.vehicle_id) {
                return bad(format!("duplicate vehicle id {}", t.vehicle_id));
            }
            for edge in [t.origin, t.destination] {
                if self.network.edge(edge).is_none() {
                    return bad(format!("trip {} references unknown edge {edge}", t.vehicle_id));
                }
            }
            if t.origin == t.destination {
                return bad(format!("trip {} starts and ends on edge {}", t.vehicle_id, t.origin));
            }
            if !(t.depart_time >= 0.0 && t.depart_time <= e.end_time) {
                return bad(format!("trip {} departs at {} outside [0, end time]", t.vehicle_id, t.depart_time));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pending,
    EnRoute,
    Arrived,
}

#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: u32,
    pub class: VehicleClass,
    pub origin: EdgeId,
    pub destination: EdgeId,
    pub route: Route,
    pub route_index: usize,
    pub lane: usize,
    /// Front bumper position from the start of the current edge (m).
    pub pos: f64,
    pub speed: f64,
    pub depart_time: f64,
    pub insert_time: Option<f64>,
    pub arrival_time: Option<f64>,
    /// Stopped at the end of its edge, unable to proceed.
    pub waiting: bool,
    pub status: Status,
    /// Summed length of all edges entered.
    pub distance: f64,
    pub waiting_time: f64,
}

impl VehicleState {
    pub fn current_edge(&self) -> EdgeId {
        self.route.edges[self.route_index]
    }

    pub fn next_edge(&self) -> Option<EdgeId> {
        self.route.edges.get(self.route_index + 1).copied()
    }
}

/// Per-vehicle outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub id: u32,
    pub class: VehicleClass,
    pub origin: EdgeId,
    pub destination: EdgeId,
    pub depart: f64,
    pub insert: Option<f64>,
    pub arrival: Option<f64>,
    pub distance: f64,
    pub waiting_time: f64,
}

impl TripRecord {
    pub fn finished(&self) -> bool {
        self.arrival.is_some()
    }

    pub fn travel_time(&self) -> Option<f64> {
        self.arrival.map(|a| a - self.depart)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyKind {
    Ttc,
    Pet,
}

/// A logged surrogate-safety episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyEvent {
    pub time: f64,
    pub kind: SafetyKind,
    /// Follower (TTC) or second entrant (PET).
    pub vehicle: u32,
    pub class: VehicleClass,
    /// Leader (TTC) or first entrant (PET).
    pub other: u32,
    pub edge: EdgeId,
    /// TTC or PET in seconds.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RerouteOutcome {
    Rerouted,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerouteRecord {
    pub time: f64,
    pub vehicle: u32,
    pub class: VehicleClass,
    pub outcome: RerouteOutcome,
}

/// Vehicle population by state at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCounts {
    pub pending: usize,
    pub en_route: usize,
    pub waiting: usize,
    pub arrived: usize,
}

impl StepCounts {
    pub fn total(&self) -> usize {
        self.pending + self.en_route + self.waiting + self.arrived
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    /// One record per trip, ordered by vehicle id.
    pub trips: Vec<TripRecord>,
    /// Edge ids in network order; index matches `edge_speeds` slots.
    pub edge_ids: Vec<EdgeId>,
    pub edge_speeds: EdgeSpeedAccumulator,
    /// Number of times a vehicle entered each edge (insertion included).
    pub edge_entries: Vec<u64>,
    pub safety: SafetyCounters,
    pub safety_log: Vec<SafetyEvent>,
    pub emissions: EmissionTotals,
    pub reroutes: Vec<RerouteRecord>,
    pub junction_log: Vec<JunctionPassage>,
    /// Counts after every step.
    pub occupancy: Vec<StepCounts>,
    /// Steps where a follower had to be held back behind its leader's new position.
    pub emergency_brakes: u64,
    /// Faults logged in permissive mode.
    pub faults: Vec<String>,
    pub steps: u64,
    pub final_time: f64,
}

impl SimulationOutput {
    pub fn unfinished(&self) -> usize {
        self.trips.iter().filter(|t| !t.finished()).count()
    }
}

#[derive(Debug, Clone, Copy)]
enum Leader {
    Vehicle { index: usize, gap: f64, speed: f64 },
    StopLine { gap: f64 },
}

#[derive(Debug, Clone, Copy)]
struct TransferRequest {
    vehicle: usize,
    target: usize,
    overshoot: f64,
    node_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Exit {
    Arrive { time: f64 },
    Transfer { target: usize, lane: usize, pos: f64, node_time: f64 },
    Blocked,
}

/// A running simulation. Most callers use [`run`].
pub struct Simulation {
    network: Network,
    static_network: Network,
    events: Vec<ClosureEvent>,
    models: ModelParams,
    policy: ReroutePolicy,
    config: EngineConfig,
    metrics: MetricsConfig,
    vehicles: Vec<VehicleState>,
    by_id: Vec<usize>,
    /// `[edge slot][lane]`, front (largest pos) first.
    lanes: Vec<Vec<VecDeque<usize>>>,
    lane_cursor: Vec<usize>,
    next_due: usize,
    due: Vec<usize>,
    stranded: Vec<Option<usize>>,
    ttc: Vec<TtcEpisode>,
    noise_base: ChaCha8Rng,
    step_index: u64,
    fuel: f64,
    edge_speeds: EdgeSpeedAccumulator,
    edge_entries: Vec<u64>,
    safety: SafetyCounters,
    safety_log: Vec<SafetyEvent>,
    reroutes: Vec<RerouteRecord>,
    junction_log: Vec<JunctionPassage>,
    last_passage: Vec<Option<JunctionPassage>>,
    occupancy: Vec<StepCounts>,
    emergency_brakes: u64,
    faults: Vec<String>,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let Scenario { network, mut trips, events, models, policy, engine, metrics } = scenario;
        trips.sort_by(|a, b| a.depart_time.total_cmp(&b.depart_time).then(a.vehicle_id.cmp(&b.vehicle_id)));
        let mut static_network = network.clone();
        for e in network.edges() {
            static_network.set_closed(e.id, false);
        }
        let vehicles: Vec<VehicleState> = trips
            .iter()
            .map(|t| VehicleState {
                id: t.vehicle_id,
                class: t.class,
                origin: t.origin,
                destination: t.destination,
                route: Route { edges: vec![t.origin], cost: 0.0 },
                route_index: 0,
                lane: 0,
                pos: 0.0,
                speed: 0.0,
                depart_time: t.depart_time,
                insert_time: None,
                arrival_time: None,
                waiting: false,
                status: Status::Pending,
                distance: 0.0,
                waiting_time: 0.0,
            })
            .collect();
        let mut by_id: Vec<usize> = (0..vehicles.len()).collect();
        by_id.sort_by_key(|&i| vehicles[i].id);
        let n_edges = network.edges().len();
        let lanes = network.edges().iter().map(|e| vec![VecDeque::new(); e.lane_count as usize]).collect();
        let n = vehicles.len();
        Ok(Simulation {
            static_network,
            events,
            models,
            policy,
            metrics,
            by_id,
            lanes,
            lane_cursor: vec![0; n_edges],
            next_due: 0,
            due: Vec::new(),
            stranded: vec![None; n],
            ttc: vec![TtcEpisode::default(); n],
            noise_base: ChaCha8Rng::seed_from_u64(engine.seed),
            config: engine,
            step_index: 0,
            fuel: 0.0,
            edge_speeds: EdgeSpeedAccumulator::new(n_edges),
            edge_entries: vec![0; n_edges],
            safety: SafetyCounters::default(),
            safety_log: Vec::new(),
            reroutes: Vec::new(),
            junction_log: Vec::new(),
            last_passage: vec![None; n_edges],
            occupancy: Vec::new(),
            emergency_brakes: 0,
            faults: Vec::new(),
            vehicles,
            network,
        })
    }

    /// Timestamp of the next step to run.
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.dt
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Vehicles ordered by departure.
    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: u32) -> Option<&VehicleState> {
        self.by_id
            .binary_search_by_key(&id, |&i| self.vehicles[i].id)
            .ok()
            .map(|k| &self.vehicles[self.by_id[k]])
    }

    pub fn reroutes(&self) -> &[RerouteRecord] {
        &self.reroutes
    }

    pub fn counts(&self) -> StepCounts {
        let mut c = StepCounts { pending: 0, en_route: 0, waiting: 0, arrived: 0 };
        for v in &self.vehicles {
            match v.status {
                Status::Pending => c.pending += 1,
                Status::Arrived => c.arrived += 1,
                Status::EnRoute if v.waiting => c.waiting += 1,
                Status::EnRoute => c.en_route += 1,
            }
        }
        c
    }

    /// All vehicles arrived or the clock reached the end time.
    pub fn is_done(&self) -> bool {
        self.time() >= self.config.end_time - GAP_TOLERANCE
            || self.vehicles.iter().all(|v| v.status == Status::Arrived)
    }

    fn fault(&mut self, message: String) -> Result<(), SimError> {
        if self.config.strict {
            Err(SimError::Integrity { time: self.time(), message })
        } else {
            self.faults.push(format!("t={}: {message}", self.time()));
            Ok(())
        }
    }

    fn slot(&self, edge: EdgeId) -> usize {
        self.network.edge_slot(edge).expect("routes only hold known edges")
    }

    fn edge_length(&self, slot: usize) -> f64 {
        self.network.edges()[slot].length
    }

    fn length_of(&self, vi: usize) -> f64 {
        self.models.length(self.vehicles[vi].class)
    }

    fn rear(&self, vi: usize) -> f64 {
        self.vehicles[vi].pos - self.length_of(vi)
    }

    /// Lane a newcomer to `slot` would use: round-robin from the cursor, first lane with room.
    fn pick_lane(&self, slot: usize, needed_rear: f64) -> Option<usize> {
        let lanes = &self.lanes[slot];
        let start = self.lane_cursor[slot];
        (0..lanes.len()).map(|k| (start + k) % lanes.len()).find(|&l| match lanes[l].back() {
            None => true,
            Some(&tail) => self.rear(tail) >= needed_rear,
        })
    }

    fn uniform_noise(&self, vehicle_id: u32) -> f64 {
        let mut rng = self.noise_base.clone();
        rng.set_stream(vehicle_id as u64);
        rng.set_word_pos(self.step_index as u128 * 2);
        rng.random::<f64>()
    }

    /// Leader seen by vehicle `vi` in the current state.
    fn leader(&self, vi: usize) -> Option<Leader> {
        let v = &self.vehicles[vi];
        let slot = self.slot(v.current_edge());
        let lane = &self.lanes[slot][v.lane];
        let k = lane.iter().position(|&x| x == vi).expect("vehicle is on its lane");
        if k > 0 {
            let ahead = lane[k - 1];
            return Some(Leader::Vehicle {
                index: ahead,
                gap: self.rear(ahead) - v.pos,
                speed: self.vehicles[ahead].speed,
            });
        }
        let next = v.next_edge()?;
        let remaining = self.edge_length(slot) - v.pos;
        if self.network.is_closed(next) {
            return Some(Leader::StopLine { gap: remaining });
        }
        let next_slot = self.slot(next);
        let lanes = &self.lanes[next_slot];
        let tail = lanes[self.lane_cursor[next_slot] % lanes.len()].back()?;
        Some(Leader::Vehicle { index: *tail, gap: remaining + self.rear(*tail), speed: self.vehicles[*tail].speed })
    }

    fn decide_speed(&self, vi: usize) -> f64 {
        let v = &self.vehicles[vi];
        let limit = self.network.edges()[self.slot(v.current_edge())].speed_limit;
        let dt = self.config.dt;
        let leader = self.leader(vi);
        match v.class {
            VehicleClass::Hdv => {
                let p = &self.models.krauss;
                let view = leader.map(|l| match l {
                    Leader::Vehicle { gap, speed, .. } => LeaderView::new(speed, (gap - p.min_gap).max(0.0)),
                    Leader::StopLine { gap } => LeaderView::new(0.0, gap.max(0.0)),
                });
                krauss_step(v.speed, view, limit, dt, self.uniform_noise(v.id), p)
            }
            VehicleClass::Cav => {
                let p = &self.models.idm;
                let view = leader.map(|l| match l {
                    Leader::Vehicle { gap, speed, .. } => LeaderView::new(speed, gap),
                    // The stop line sits s0 short of the obstacle so the vehicle halts on the line.
                    Leader::StopLine { gap } => LeaderView::new(0.0, gap + p.s0),
                });
                match view {
                    Some(l) if l.gap <= 0.0 => 0.0,
                    _ => idm_step(v.speed, view, limit, dt, p).expect("gap is positive"),
                }
            }
        }
    }

    fn assign_route(&mut self, vi: usize, route: Route, outcome_time: f64, log: bool) -> Result<(), SimError> {
        if !route.is_connected(&self.network) {
            self.fault(format!("vehicle {} got a disconnected route {:?}", self.vehicles[vi].id, route.edges))?;
        }
        let v = &mut self.vehicles[vi];
        v.route = route;
        v.route_index = 0;
        if log {
            self.reroutes.push(RerouteRecord {
                time: outcome_time,
                vehicle: v.id,
                class: v.class,
                outcome: RerouteOutcome::Rerouted,
            });
        }
        Ok(())
    }

    fn reroute_phase(&mut self, t: f64, closures_changed: bool) -> Result<(), SimError> {
        for k in 0..self.by_id.len() {
            let vi = self.by_id[k];
            if self.vehicles[vi].status != Status::EnRoute {
                continue;
            }
            let at = self.vehicles[vi].route_index;
            if !closures_changed && self.stranded[vi] == Some(at) {
                continue;
            }
            let v = &self.vehicles[vi];
            let progress = RouteProgress { class: v.class, route: &v.route.edges, route_index: v.route_index };
            let decision = plan_reroute(progress, &self.network, self.policy).expect("routes hold known edges");
            match decision {
                RerouteDecision::NoChange => self.stranded[vi] = None,
                RerouteDecision::Reroute(route) => {
                    self.stranded[vi] = None;
                    self.assign_route(vi, route, t, true)?;
                }
                RerouteDecision::Unreachable => {
                    if self.stranded[vi].is_none() {
                        let v = &self.vehicles[vi];
                        self.reroutes.push(RerouteRecord {
                            time: t,
                            vehicle: v.id,
                            class: v.class,
                            outcome: RerouteOutcome::Unreachable,
                        });
                    }
                    self.stranded[vi] = Some(self.vehicles[vi].route_index);
                }
            }
        }
        Ok(())
    }

    fn initial_route(&self, vi: usize) -> Route {
        let v = &self.vehicles[vi];
        // CAV plan with live closure information, HDV with the static map.
        let live = match v.class {
            VehicleClass::Cav => shortest_path(&self.network, v.origin, v.destination).expect("known edges"),
            VehicleClass::Hdv => None,
        };
        live.or_else(|| shortest_path(&self.static_network, v.origin, v.destination).expect("known edges"))
            .expect("static network connects every origin to every destination")
    }

    fn insertion_phase(&mut self, t: f64) -> Result<(), SimError> {
        while self.next_due < self.vehicles.len() && self.vehicles[self.next_due].depart_time <= t + GAP_TOLERANCE {
            self.due.push(self.next_due);
            self.next_due += 1;
        }
        let mut still_due = Vec::with_capacity(self.due.len());
        let due = std::mem::take(&mut self.due);
        for vi in due {
            let origin = self.vehicles[vi].origin;
            let slot = self.slot(origin);
            if self.network.is_closed(origin) {
                still_due.push(vi);
                continue;
            }
            let Some(lane) = self.pick_lane(slot, self.config.insertion_min_gap) else {
                still_due.push(vi);
                continue;
            };
            let route = self.initial_route(vi);
            self.assign_route(vi, route, t, false)?;
            let length = self.edge_length(slot);
            let v = &mut self.vehicles[vi];
            v.lane = lane;
            v.pos = 0.0;
            v.speed = 0.0;
            v.insert_time = Some(t);
            v.status = Status::EnRoute;
            v.distance = length;
            self.lanes[slot][lane].push_back(vi);
            self.lane_cursor[slot] = (lane + 1) % self.lanes[slot].len();
            self.edge_entries[slot] += 1;
        }
        self.due = still_due;
        Ok(())
    }

    /// Advances the world by one step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.time();
        let dt = self.config.dt;

        let transitions = apply_events(&mut self.network, &self.events, t);
        self.reroute_phase(t, !transitions.is_empty())?;
        self.insertion_phase(t)?;

        // Decisions from the state at the start of the step.
        let active: Vec<usize> = (0..self.vehicles.len()).filter(|&i| self.vehicles[i].status == Status::EnRoute).collect();
        let mut next_speed = vec![0.0; self.vehicles.len()];
        for &vi in &active {
            next_speed[vi] = self.decide_speed(vi);
        }
        let prev_speed: Vec<f64> = self.vehicles.iter().map(|v| v.speed).collect();
        let decision_slot: Vec<usize> = active.iter().map(|&vi| self.slot(self.vehicles[vi].current_edge())).collect();

        // Lane fronts crossing their edge end.
        let mut exits: BTreeMap<usize, Exit> = BTreeMap::new();
        let mut requests: BTreeMap<usize, Vec<TransferRequest>> = BTreeMap::new();
        for slot in 0..self.lanes.len() {
            let length = self.edge_length(slot);
            for lane in 0..self.lanes[slot].len() {
                let Some(&vi) = self.lanes[slot][lane].front() else { continue };
                let v = &self.vehicles[vi];
                let speed = next_speed[vi];
                let tentative = v.pos + speed * dt;
                if tentative <= length {
                    continue;
                }
                let node_time = t + (length - v.pos) / speed;
                match v.next_edge() {
                    None => {
                        exits.insert(vi, Exit::Arrive { time: node_time });
                    }
                    Some(next) if self.network.is_closed(next) => {
                        exits.insert(vi, Exit::Blocked);
                    }
                    Some(next) => {
                        let target = self.slot(next);
                        requests.entry(target).or_default().push(TransferRequest {
                            vehicle: vi,
                            target,
                            overshoot: tentative - length,
                            node_time,
                        });
                    }
                }
            }
        }

        // One entrant per edge per step; the earliest at the node wins if there is room.
        for (target, mut contenders) in requests {
            contenders.sort_by(|a, b| {
                a.node_time.total_cmp(&b.node_time).then(self.vehicles[a.vehicle].id.cmp(&self.vehicles[b.vehicle].id))
            });
            let first = contenders[0];
            let admitted = self.pick_lane(target, f64::MIN_POSITIVE).map(|lane| {
                let room = self.lanes[target][lane].back().map_or(f64::INFINITY, |&tail| self.rear(tail));
                (lane, first.overshoot.min(room))
            });
            for (k, req) in contenders.iter().enumerate() {
                let exit = match admitted {
                    Some((lane, pos)) if k == 0 => {
                        Exit::Transfer { target: req.target, lane, pos, node_time: req.node_time }
                    }
                    _ => Exit::Blocked,
                };
                exits.insert(req.vehicle, exit);
            }
        }

        // Final positions, front to back on every lane.
        let mut leaving: Vec<(usize, Exit)> = Vec::new();
        for slot in 0..self.lanes.len() {
            let length = self.edge_length(slot);
            for lane in 0..self.lanes[slot].len() {
                let mut cap = length;
                let mut emergency = 0;
                for k in 0..self.lanes[slot][lane].len() {
                    let vi = self.lanes[slot][lane][k];
                    let old_pos = self.vehicles[vi].pos;
                    if k == 0 {
                        match exits.get(&vi).copied() {
                            Some(Exit::Blocked) => {
                                let v = &mut self.vehicles[vi];
                                v.pos = length;
                                v.speed = 0.0;
                                v.waiting = true;
                                cap = length - self.models.length(v.class);
                                continue;
                            }
                            Some(exit) => {
                                leaving.push((vi, exit));
                                continue;
                            }
                            None => {}
                        }
                    }
                    let tentative = old_pos + next_speed[vi] * dt;
                    let mut new_pos = tentative.min(cap).max(old_pos);
                    if new_pos < tentative - GAP_TOLERANCE && cap < length {
                        emergency += 1;
                    }
                    let mut speed = (new_pos - old_pos) / dt;
                    let blocked_ahead =
                        k == 0 && self.vehicles[vi].next_edge().is_some_and(|n| self.network.is_closed(n));
                    let mut waiting = false;
                    if blocked_ahead && length - new_pos < STOP_LINE_SNAP {
                        new_pos = length;
                        speed = 0.0;
                        waiting = true;
                    }
                    let v = &mut self.vehicles[vi];
                    v.pos = new_pos;
                    v.speed = speed;
                    v.waiting = waiting;
                    cap = new_pos - self.models.length(v.class);
                }
                self.emergency_brakes += emergency;
            }
        }

        // Apply arrivals and transfers.
        let mut passages = Vec::new();
        for (vi, exit) in leaving {
            let from_slot = self.slot(self.vehicles[vi].current_edge());
            let lane = self.vehicles[vi].lane;
            let popped = self.lanes[from_slot][lane].pop_front();
            debug_assert_eq!(popped, Some(vi));
            let remaining = self.edge_length(from_slot) - self.vehicles[vi].pos;
            match exit {
                Exit::Arrive { time } => {
                    let v = &mut self.vehicles[vi];
                    v.speed = next_speed[vi];
                    v.pos = self.network.edges()[from_slot].length;
                    v.arrival_time = Some(time);
                    v.status = Status::Arrived;
                    v.waiting = false;
                }
                Exit::Transfer { target, lane: target_lane, pos, node_time } => {
                    if self.network.edges()[target].closed {
                        self.fault(format!("vehicle {} entered closed edge {}", self.vehicles[vi].id, self.network.edges()[target].id))?;
                    }
                    let speed = (remaining + pos) / dt;
                    let length = self.length_of(vi);
                    let target_length = self.edge_length(target);
                    let approach = self.network.edges()[from_slot].id;
                    let v = &mut self.vehicles[vi];
                    v.route_index += 1;
                    v.lane = target_lane;
                    v.pos = pos;
                    v.speed = speed;
                    v.waiting = false;
                    v.distance += target_length;
                    self.lanes[target][target_lane].push_back(vi);
                    self.lane_cursor[target] = (target_lane + 1) % self.lanes[target].len();
                    self.edge_entries[target] += 1;
                    passages.push(JunctionPassage {
                        vehicle: v.id,
                        edge: self.network.edges()[target].id,
                        approach,
                        entry_time: node_time,
                        exit_time: node_time + length / speed,
                    });
                }
                Exit::Blocked => unreachable!("blocked vehicles stay on their lane"),
            }
        }
        passages.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then(a.vehicle.cmp(&b.vehicle)));
        for p in passages {
            self.record_passage(p);
        }

        // Metrics.
        for (&vi, &slot) in active.iter().zip(&decision_slot) {
            let v = &self.vehicles[vi];
            self.edge_speeds.record(slot, v.speed);
            let accel = (v.speed - prev_speed[vi]) / dt;
            self.fuel += fuel_rate(v.speed, accel, &self.metrics.fuel) * dt;
            if v.waiting {
                self.vehicles[vi].waiting_time += dt;
            }
        }
        self.observe_ttc(t + dt, &active);

        self.step_index += 1;
        self.check_integrity()?;
        let counts = self.counts();
        if counts.total() != self.vehicles.len() {
            self.fault(format!("vehicle count {} != {}", counts.total(), self.vehicles.len()))?;
        }
        self.occupancy.push(counts);
        Ok(())
    }

    fn record_passage(&mut self, p: JunctionPassage) {
        let slot = self.slot(p.edge);
        if let Some(prev) = self.last_passage[slot] {
            let pet = p.entry_time - prev.exit_time;
            if prev.approach != p.approach && pet > 0.0 && pet <= self.metrics.pet_threshold {
                self.safety.pet_events += 1;
                let class = self.vehicle(p.vehicle).expect("known vehicle").class;
                self.safety_log.push(SafetyEvent {
                    time: p.entry_time,
                    kind: SafetyKind::Pet,
                    vehicle: p.vehicle,
                    class,
                    other: prev.vehicle,
                    edge: p.edge,
                    value: pet,
                });
            }
        }
        self.last_passage[slot] = Some(p);
        self.junction_log.push(p);
    }

    fn observe_ttc(&mut self, time: f64, active: &[usize]) {
        for &vi in active {
            if self.vehicles[vi].status != Status::EnRoute {
                self.ttc[vi] = TtcEpisode::default();
                continue;
            }
            let (leader, value) = match self.leader(vi) {
                Some(Leader::Vehicle { index, gap, speed }) => {
                    (Some(index), ttc(gap.max(0.0), self.vehicles[vi].speed - speed))
                }
                _ => (None, None),
            };
            let class = self.vehicles[vi].class;
            let leader_id = leader.map(|i| self.vehicles[i].id);
            if self.ttc[vi].observe(class, leader_id, value, &mut self.safety) {
                let v = &self.vehicles[vi];
                self.safety_log.push(SafetyEvent {
                    time,
                    kind: SafetyKind::Ttc,
                    vehicle: v.id,
                    class,
                    other: leader_id.expect("episode has a leader"),
                    edge: v.current_edge(),
                    value: value.expect("episode has a TTC"),
                });
            }
        }
    }

    fn check_integrity(&mut self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        for (slot, lanes) in self.lanes.iter().enumerate() {
            let edge = &self.network.edges()[slot];
            for lane in lanes {
                for (k, &vi) in lane.iter().enumerate() {
                    let v = &self.vehicles[vi];
                    if v.pos < -GAP_TOLERANCE || v.pos > edge.length + GAP_TOLERANCE {
                        problems.push(format!("vehicle {} at {} outside edge {}", v.id, v.pos, edge.id));
                    }
                    // Entrants keep the speed they carried over the node, so only the
                    // vehicle cap is checked here; decisions already respect edge limits.
                    let cap = self.models.v_max(v.class);
                    if v.speed < 0.0 || v.speed > cap + GAP_TOLERANCE {
                        problems.push(format!("vehicle {} speed {} outside [0, {cap}]", v.id, v.speed));
                    }
                    if k > 0 {
                        let ahead = lane[k - 1];
                        let gap = self.rear(ahead) - v.pos;
                        if gap < -GAP_TOLERANCE {
                            problems.push(format!("negative gap {gap} behind vehicle {}", self.vehicles[ahead].id));
                        }
                    }
                }
            }
        }
        for p in problems {
            self.fault(p)?;
        }
        Ok(())
    }

    pub fn into_output(self) -> SimulationOutput {
        let mut trips: Vec<TripRecord> = self
            .vehicles
            .iter()
            .map(|v| TripRecord {
                id: v.id,
                class: v.class,
                origin: v.origin,
                destination: v.destination,
                depart: v.depart_time,
                insert: v.insert_time,
                arrival: v.arrival_time,
                distance: v.distance,
                waiting_time: v.waiting_time,
            })
            .collect();
        trips.sort_by_key(|t| t.id);
        let final_time = self.time();
        SimulationOutput {
            trips,
            edge_ids: self.network.edges().iter().map(|e| e.id).collect(),
            edge_speeds: self.edge_speeds,
            edge_entries: self.edge_entries,
            safety: self.safety,
            safety_log: self.safety_log,
            emissions: EmissionTotals::from_fuel(self.fuel),
            reroutes: self.reroutes,
            junction_log: self.junction_log,
            occupancy: self.occupancy,
            emergency_brakes: self.emergency_brakes,
            faults: self.faults,
            steps: self.step_index,
            final_time,
        }
    }
}

/// Runs a scenario to completion (all arrived or end time reached).
pub fn run(scenario: Scenario) -> Result<SimulationOutput, SimError> {
    let mut sim = Simulation::new(scenario)?;
    while !sim.is_done() {
        sim.step()?;
    }
    Ok(sim.into_output())
}
