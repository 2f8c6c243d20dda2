//! Time-stepped simulation loop, metrics against the careful baseline, and
//! parameter sweeps.
//!
//! Each step runs, in this order: CAM generation and delivery into the
//! neighbour tables, risk classification and driver reaction, right-of-way
//! decisions and car following, kinematics, collision detection and
//! respawning. CAMs and warnings only exist in [`BehaviorMode::Icrw`].

pub mod output;
mod sweep;

pub use sweep::{parse_condition, sweep, Condition, RunMetrics, SummaryRow, SweepGrid, SweepOutput};

use crate::channel::{ChannelError, Endpoint, LinkStore};
use crate::icrw::{assess, IcrwError, NeighborTable, RiskLevel};
use crate::messaging::{cam_phase, deliver, due_cams, ingest, PacketRecord};
use crate::mobility::{
    apply_driver_reaction, detect_collisions, emergency_stop_distance, stop_line_accel, yield_decision,
    ApproachInfo, Attention, CollisionEvent, Decision, DriverParams, EdgeOccupancy, TripOutcome, TripSample,
    VehicleId, VehicleState,
};
use crate::rng;
use crate::scenario::{BehaviorMode, NodeId, RoadNetwork, ScenarioConfig, ScenarioError};
use crate::stats;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Icrw(#[from] IcrwError),
    #[error("baseline must be a careful run, got {0}")]
    BaselineMismatch(&'static str),
    #[error("empty sweep axis: {0}")]
    EmptyAxis(&'static str),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("output: {0}")]
    Output(String),
}

impl From<std::io::Error> for EngineError {
    fn from(e: std::io::Error) -> Self {
        EngineError::Output(e.to_string())
    }
}

impl From<csv::Error> for EngineError {
    fn from(e: csv::Error) -> Self {
        EngineError::Output(e.to_string())
    }
}

/// A change of a vehicle's risk level away from IDLE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskEvent {
    pub time: f64,
    pub vehicle: VehicleId,
    pub level: RiskLevel,
    pub tt_self: f64,
    pub tt_neighbor: Option<f64>,
    pub tb_self: f64,
    pub neighbor: Option<VehicleId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub collisions: Vec<CollisionEvent>,
    /// Completed, crash-truncated and (at the end) unfinished trips.
    pub trips: Vec<TripSample>,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub warnings: u64,
    pub alarms: u64,
    pub risk_events: Vec<RiskEvent>,
    pub packet_log: Vec<PacketRecord>,
}

impl SimulationResult {
    pub fn hours(&self) -> f64 {
        self.config.sim_duration / 3600.0
    }
}

pub fn collisions_per_hour(result: &SimulationResult) -> f64 {
    result.collisions.len() as f64 / result.hours()
}

/// Mean travel time per kilometre over finished trips, in s/km. Trips cut
/// short by a crash count only when the configuration says so.
pub fn mean_pace(result: &SimulationResult) -> f64 {
    let include_crashed = !result.config.exclude_crashed_trips;
    let paces: Vec<f64> = result
        .trips
        .iter()
        .filter(|t| t.distance > 0.0)
        .filter(|t| match t.outcome {
            TripOutcome::Completed => true,
            TripOutcome::Crashed => include_crashed,
            TripOutcome::InProgress => false,
        })
        .map(|t| t.duration / (t.distance / 1000.0))
        .collect();
    stats::mean(&paces)
}

/// Seconds per kilometre saved relative to the careful baseline; negative
/// when the condition is slower.
pub fn time_improvement_per_km(result: &SimulationResult, baseline: &SimulationResult) -> Result<f64, EngineError> {
    if baseline.config.behavior_mode != BehaviorMode::Careful {
        return Err(EngineError::BaselineMismatch(baseline.config.behavior_mode.as_str()));
    }
    Ok(mean_pace(baseline) - mean_pace(result))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricSummary {
    pub collisions_per_hour: f64,
    pub collisions_ci95: f64,
    pub time_improvement_per_km: f64,
    pub time_improvement_ci95: f64,
    pub runs: usize,
}

impl MetricSummary {
    /// Mean and 95 % half-width over per-seed values.
    pub fn from_runs(collisions: &[f64], improvement: &[f64]) -> Self {
        Self {
            collisions_per_hour: stats::mean(collisions),
            collisions_ci95: stats::ci95_halfwidth(collisions),
            time_improvement_per_km: stats::mean(improvement),
            time_improvement_ci95: stats::ci95_halfwidth(improvement),
            runs: collisions.len(),
        }
    }
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    net: &'a RoadNetwork,
    p: DriverParams,
    states: Vec<VehicleState>,
    tables: Vec<NeighborTable>,
    next_id: u64,
    period_steps: u64,
    attention: Attention,
}

impl Sim<'_> {
    fn spawn(&mut self, now: f64) -> VehicleState {
        let id = VehicleId(self.next_id);
        self.next_id += 1;
        let mut r = rng::stream(self.cfg.rng_seed, "spawn", &[id.0]);
        let (edge, pos) = match self.pick_initial_slot(&mut r, now) {
            Some(slot) => slot,
            None => (self.pick_spawn_edge(&mut r), crate::mobility::spawn_offset(self.net, &self.p)),
        };
        let mut s = VehicleState::spawn(id, edge, self.net, self.cfg.rng_seed, now, self.attention, &self.p);
        s.pos = pos;
        s.cam_phase = cam_phase(self.cfg.rng_seed, id, self.period_steps);
        s
    }

    /// The starting fleet is spread along the edges, away from stop lines
    /// and from each other.
    fn pick_initial_slot(&self, r: &mut ChaCha8Rng, now: f64) -> Option<(usize, f64)> {
        if now > 0.0 {
            return None;
        }
        let n = self.net.edges().len();
        let s0 = crate::mobility::spawn_offset(self.net, &self.p);
        let spacing = 2.0 * self.p.length + self.p.min_gap;
        for _ in 0..200 {
            let e = r.random_range(0..n);
            let hi = self.net.stop_line(e) - self.p.lookahead;
            if hi <= s0 {
                continue;
            }
            let pos = r.random_range(s0..hi);
            if self.states.iter().all(|s| s.edge != e || (s.pos - pos).abs() > spacing) {
                return Some((e, pos));
            }
        }
        None
    }

    /// A uniformly random edge whose start is clear of traffic, falling back
    /// to any edge with a free start.
    fn pick_spawn_edge(&self, r: &mut ChaCha8Rng) -> usize {
        let n = self.net.edges().len();
        let start = r.random_range(0..n);
        let clear_start = |e: usize, inbound: f64| {
            let s0 = crate::mobility::spawn_offset(self.net, &self.p);
            let from = self.net.edge(e).from;
            self.states.iter().all(|s| {
                let own = s.edge != e || s.pos - self.p.length > s0 + self.p.min_gap + 10.0;
                let near_node = self.net.edge(s.edge).to == from && s.dist_to_stop_line(self.net) < inbound;
                let leaving = s.prev_edge.is_some() && self.net.edge(s.edge).from == from && s.pos < s0 + 10.0;
                own && !near_node && !leaving
            })
        };
        for k in 0..200 {
            let e = if k == 0 { start } else { r.random_range(0..n) };
            if clear_start(e, 40.0) {
                return e;
            }
        }
        (0..n).map(|k| (start + k) % n).find(|&e| clear_start(e, 0.0)).unwrap_or(start)
    }
}

/// Run one simulation.
pub fn run(config: &ScenarioConfig) -> Result<SimulationResult, EngineError> {
    run_observed(config, |_, _| {})
}

/// Run one simulation, handing the fleet to `observe` after every step
/// (before crashed vehicles are replaced).
pub fn run_observed<F>(config: &ScenarioConfig, mut observe: F) -> Result<SimulationResult, EngineError>
where
    F: FnMut(f64, &[VehicleState]),
{
    config.validate()?;
    let net = config.network.build()?;
    let dt = config.time_step;
    let steps = (config.sim_duration / dt).round() as u64;
    let period_steps = (config.cam_period / dt).round() as u64;
    let icrw_on = config.behavior_mode == BehaviorMode::Icrw;
    let icrw = config.icrw_params();
    let attention = if config.behavior_mode == BehaviorMode::Careful {
        Attention::Careful
    } else {
        Attention::Distracted
    };
    let bytes = match &config.channel {
        crate::channel::ChannelModel::Emulated(e) => e.packet_bytes,
        _ => 100,
    };

    let mut sim = Sim {
        cfg: config,
        net: &net,
        p: config.driver_params(),
        states: Vec::with_capacity(config.vehicle_count),
        tables: Vec::with_capacity(config.vehicle_count),
        next_id: 0,
        period_steps,
        attention,
    };
    for _ in 0..config.vehicle_count {
        let s = sim.spawn(0.0);
        sim.states.push(s);
        sim.tables.push(NeighborTable::new());
    }

    let mut store = LinkStore::new(config.rng_seed, dt);
    let mut channel_rng = rng::stream(config.rng_seed, "channel", &[]);
    let mut res = SimulationResult {
        config: config.clone(),
        seed: config.rng_seed,
        collisions: Vec::new(),
        trips: Vec::new(),
        packets_sent: 0,
        packets_delivered: 0,
        warnings: 0,
        alarms: 0,
        risk_events: Vec::new(),
        packet_log: Vec::new(),
    };
    let p = sim.p;
    let v_max = config.max_speed;
    let n_nodes = net.nodes().len();
    // how far a dead-reckoned record can travel before it expires
    let reach = v_max * icrw.neighbor_ttl;
    let clearance = net.box_half() + icrw.vehicle_length;
    let mut by_node: Vec<Vec<ApproachInfo>> = vec![Vec::new(); n_nodes];
    let mut infos: Vec<(NodeId, ApproachInfo)> = Vec::with_capacity(config.vehicle_count);

    for step in 0..steps {
        let t = step as f64 * dt;

        if icrw_on {
            let cams = due_cams(&sim.states, &net, step, dt, period_steps, bytes);
            if !cams.is_empty() {
                let receivers: Vec<Endpoint> = sim
                    .states
                    .iter()
                    .map(|s| Endpoint {
                        id: s.id,
                        pos: s.position(&net),
                    })
                    .collect();
                let interest: Vec<[NodeId; 2]> = sim
                    .states
                    .iter()
                    .map(|s| [net.edge(s.edge).to, s.next_edge().map_or(net.edge(s.edge).to, |e| net.edge(e).to)])
                    .collect();
                let mut audience = Vec::with_capacity(receivers.len());
                for cam in &cams {
                    let log = config.log_packets.then_some(&mut res.packet_log);
                    let rx: &[Endpoint] = if config.cam_filter {
                        audience.clear();
                        audience.extend(receivers.iter().zip(&interest).filter_map(|(r, nodes)| {
                            nodes
                                .iter()
                                .any(|&n| net.near_approach(n, cam.pos, clearance + reach, reach))
                                .then_some(*r)
                        }));
                        &audience
                    } else {
                        &receivers
                    };
                    let map = deliver(cam, rx, &config.channel, &net, &mut store, &mut channel_rng, log)?;
                    for (i, s) in sim.states.iter().enumerate() {
                        if let Some(&ok) = map.get(&s.id) {
                            res.packets_sent += 1;
                            res.packets_delivered += u64::from(ok);
                            ingest(cam, ok, &mut sim.tables[i]);
                        }
                    }
                }
            }
            for (s, table) in sim.states.iter_mut().zip(&mut sim.tables) {
                table.purge(t, icrw.neighbor_ttl);
                let dist = s.dist_to_stop_line(&net);
                let risk = assess(s.edge, dist.max(0.0), s.speed, table, &net, t, &icrw)?;
                let r = apply_driver_reaction(s, &risk);
                if r.warning_onset || r.alarm_onset {
                    if r.alarm_onset {
                        res.alarms += 1;
                    } else {
                        res.warnings += 1;
                    }
                    res.risk_events.push(RiskEvent {
                        time: t,
                        vehicle: s.id,
                        level: risk.level,
                        tt_self: risk.tt_self,
                        tt_neighbor: risk.tt_neighbor,
                        tb_self: risk.tb_self,
                        neighbor: risk.neighbor,
                    });
                }
            }
        }

        // Right of way and car following.
        let occ = EdgeOccupancy::new(&sim.states, &net);
        for list in &mut by_node {
            list.clear();
        }
        infos.clear();
        for s in &sim.states {
            let (node, info) = ApproachInfo::of(s, &net, &p, v_max.min(net.edge(s.edge).speed_limit))
                .expect("every vehicle has a next node");
            by_node[node].push(info);
            infos.push((node, info));
        }
        release_deadlocks(&mut sim.states, &by_node, &infos, &net, &occ, &p);
        let mut accels = Vec::with_capacity(sim.states.len());
        for (i, s) in sim.states.iter().enumerate() {
            let limit = v_max.min(net.edge(s.edge).speed_limit);
            let mut a = crate::mobility::car_follow_accel(s.speed, occ.leader(i, &sim.states, &net, &p), limit, &p, dt);
            let (node, me) = infos[i];
            let mut yielding = false;
            if me.careful && !me.in_box && me.dist <= p.lookahead {
                let blocked = exit_blocked(s, &sim.states, &occ, &net, &p);
                let d = yield_decision(&me, &by_node[node], &net, &p, blocked);
                if d == Decision::Yield && me.dist >= emergency_stop_distance(s.speed, &p) {
                    a = a.min(stop_line_accel(s.speed, me.dist, &p, dt));
                    yielding = true;
                }
            }
            accels.push((a, yielding));
        }
        let now = t + dt;
        for (s, (a, yielding)) in sim.states.iter_mut().zip(accels) {
            s.yielding = yielding;
            if let Some(trip) = s.advance(a, &net, v_max, dt, now) {
                res.trips.push(trip);
            }
            if s.yielding && s.speed < 0.1 {
                s.waiting += dt;
            } else {
                s.waiting = 0.0;
            }
        }

        observe(now, &sim.states);

        // Collisions and respawning.
        let events = detect_collisions(&sim.states, &net, &p, now);
        if !events.is_empty() {
            let mut crashed: Vec<VehicleId> = events.iter().flat_map(|e| [e.vehicles.0, e.vehicles.1]).collect();
            crashed.sort();
            crashed.dedup();
            res.collisions.extend(events);
            respawn(&crashed, &mut sim, &mut store, &mut res.trips, now);
        }
    }

    let end = steps as f64 * dt;
    for s in &sim.states {
        res.trips.push(s.close_trip(end, TripOutcome::InProgress));
    }
    Ok(res)
}

/// Replace crashed vehicles by fresh ones at random free edge origins,
/// closing their trips.
fn respawn(ids: &[VehicleId], sim: &mut Sim<'_>, store: &mut LinkStore, trips: &mut Vec<TripSample>, now: f64) {
    for &id in ids {
        let Some(i) = sim.states.iter().position(|s| s.id == id) else {
            continue;
        };
        trips.push(sim.states[i].close_trip(now, TripOutcome::Crashed));
        store.forget(id);
        sim.states.remove(i);
        sim.tables.remove(i);
        let s = sim.spawn(now);
        sim.states.insert(i, s);
        sim.tables.insert(i, NeighborTable::new());
    }
}

/// The careful driver's exit edge has a standing queue reaching back to
/// the box.
fn exit_blocked(s: &VehicleState, states: &[VehicleState], occ: &EdgeOccupancy, net: &RoadNetwork, p: &DriverParams) -> bool {
    let Some(next) = s.next_edge() else {
        return false;
    };
    let Some(j) = occ.last_on(next) else {
        return false;
    };
    let last = &states[j];
    last.pos - p.length < net.box_half() + p.length + p.min_gap && last.speed < 2.0
}

/// When every vehicle around a node has been standing still and some careful
/// driver has been waiting for a while, let the waiting driver with the
/// smallest id go first.
fn release_deadlocks(
    states: &mut [VehicleState],
    by_node: &[Vec<ApproachInfo>],
    infos: &[(NodeId, ApproachInfo)],
    net: &RoadNetwork,
    occ: &EdgeOccupancy,
    p: &DriverParams,
) {
    for (node, list) in by_node.iter().enumerate() {
        if !list.iter().any(|a| a.stalled) || list.iter().any(|a| a.deadlock_pass) {
            continue;
        }
        let still = list
            .iter()
            .filter(|a| a.in_box || a.dist <= p.lookahead)
            .all(|a| !a.in_box && a.speed < 0.1);
        if !still {
            continue;
        }
        let pick = infos
            .iter()
            .enumerate()
            .filter(|(_, (n, a))| *n == node && a.stalled)
            .filter(|(i, _)| !exit_blocked(&states[*i], states, occ, net, p))
            .min_by_key(|(_, (_, a))| a.id)
            .map(|(i, _)| i);
        if let Some(i) = pick {
            states[i].deadlock_pass = Some(node);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use proptest::prelude::*;

    fn short(mode: BehaviorMode, channel: ChannelModel, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            sim_duration: 300.0,
            behavior_mode: mode,
            channel,
            rng_seed: seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn same_seed_same_result() {
        let c = short(BehaviorMode::Icrw, ChannelModel::IidLoss { per: 0.3 }, 4);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
    }

    #[test]
    fn careful_short_run_is_collision_free() {
        for seed in 0..3 {
            let r = run(&short(BehaviorMode::Careful, ChannelModel::Ideal, seed)).unwrap();
            assert!(r.collisions.is_empty(), "seed {seed}: {:?}", r.collisions);
            assert!(r.trips.iter().any(|t| t.outcome == TripOutcome::Completed));
        }
    }

    #[test]
    fn noapp_ignores_the_channel() {
        let a = run(&short(BehaviorMode::NoApp, ChannelModel::Ideal, 2)).unwrap();
        let b = run(&short(BehaviorMode::NoApp, ChannelModel::DistanceCutoff { dmax: 20.0 }, 2)).unwrap();
        assert_eq!(a.collisions, b.collisions);
        assert_eq!(a.trips, b.trips);
    }

    #[test]
    fn fleet_size_and_time_are_conserved() {
        let c = short(BehaviorMode::NoApp, ChannelModel::Ideal, 5);
        let r = run(&c).unwrap();
        let vehicle_seconds: f64 = r.trips.iter().map(|t| t.duration).sum();
        let expected = c.vehicle_count as f64 * c.sim_duration;
        assert!((vehicle_seconds - expected).abs() < 1e-6 * expected, "{vehicle_seconds} vs {expected}");
        let open = r.trips.iter().filter(|t| t.outcome == TripOutcome::InProgress).count();
        assert_eq!(open, c.vehicle_count);
    }

    #[test]
    fn collision_rate_arithmetic() {
        let mut r = run(&ScenarioConfig {
            sim_duration: 1.0,
            ..ScenarioConfig::default()
        })
        .unwrap();
        r.config.sim_duration = 36_000.0;
        r.collisions = vec![
            CollisionEvent {
                time: 0.0,
                node: 0,
                vehicles: (VehicleId(0), VehicleId(1))
            };
            30
        ];
        assert_eq!(collisions_per_hour(&r), 3.0);
        r.collisions.truncate(7);
        r.config.sim_duration = 1800.0;
        assert_eq!(collisions_per_hour(&r), 14.0);
        r.collisions.clear();
        assert_eq!(collisions_per_hour(&r), 0.0);
    }

    fn trip(duration: f64, distance: f64, outcome: TripOutcome) -> TripSample {
        TripSample {
            vehicle: VehicleId(0),
            start: 0.0,
            end: duration,
            distance,
            duration,
            outcome,
        }
    }

    #[test]
    fn improvement_against_baseline() {
        let mut base = run(&ScenarioConfig {
            sim_duration: 1.0,
            behavior_mode: BehaviorMode::Careful,
            ..ScenarioConfig::default()
        })
        .unwrap();
        base.trips = vec![trip(120.0, 1000.0, TripOutcome::Completed)];
        let mut other = base.clone();
        assert_eq!(time_improvement_per_km(&other, &base).unwrap(), 0.0);
        other.config.behavior_mode = BehaviorMode::NoApp;
        other.trips = vec![
            trip(118.0, 1000.0, TripOutcome::Completed),
            trip(10.0, 300.0, TripOutcome::Crashed),
            trip(5.0, 20.0, TripOutcome::InProgress),
        ];
        assert_eq!(time_improvement_per_km(&other, &base).unwrap(), 2.0);
        assert!(time_improvement_per_km(&base, &other).is_err());
        other.config.exclude_crashed_trips = false;
        let with_crash = time_improvement_per_km(&other, &base).unwrap();
        assert!((with_crash - (120.0 - (118.0 + 10.0 / 0.3) / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn cam_filter_only_saves_work() {
        for channel in [ChannelModel::Ideal, ChannelModel::DistanceCutoff { dmax: 40.0 }] {
            let mut c = short(BehaviorMode::Icrw, channel, 2);
            c.sim_duration = 120.0;
            c.alarm_threshold = 0.5;
            let a = run(&c).unwrap();
            c.cam_filter = false;
            let b = run(&c).unwrap();
            assert_eq!(a.collisions, b.collisions);
            assert_eq!(a.trips, b.trips);
            assert_eq!((a.warnings, a.alarms), (b.warnings, b.alarms));
            assert!(a.packets_sent <= b.packets_sent);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        #[test]
        fn fleet_stays_on_the_network(seed in 1u64..1000, mode in 0usize..3) {
            let mode = [BehaviorMode::Careful, BehaviorMode::NoApp, BehaviorMode::Icrw][mode];
            let mut c = short(mode, ChannelModel::IidLoss { per: 0.2 }, seed);
            c.sim_duration = 60.0;
            let net = c.network.build().unwrap();
            let mut steps = 0;
            let r = run_observed(&c, |_, states| {
                steps += 1;
                assert_eq!(states.len(), c.vehicle_count);
                let mut ids: Vec<_> = states.iter().map(|s| s.id).collect();
                ids.sort();
                ids.dedup();
                assert_eq!(ids.len(), states.len());
                for s in states {
                    assert!(s.speed >= 0.0 && s.speed <= c.max_speed + 1e-9);
                    assert!(s.pos >= 0.0 && s.pos <= net.edge(s.edge).length + 1e-9);
                }
            })
            .unwrap();
            prop_assert_eq!(steps, 600);
            for e in &r.collisions {
                prop_assert!(e.vehicles.0 < e.vehicles.1);
            }
            if mode == BehaviorMode::Careful {
                prop_assert!(r.collisions.is_empty());
            }
        }
    }
}
