//! Vehicle kinematics, driver behaviour at intersections, collision
//! detection and respawning.
//!
//! Vehicles are points-with-length on single-lane directed edges. The front
//! bumper position `pos` is measured from the edge's start node. A vehicle
//! occupies the conflict box of a node while any part of it lies within
//! `box_side / 2` of the node centre.

use crate::icrw::{RiskAssessment, RiskLevel};
use crate::rng;
use crate::scenario::{random_turn, route_from, EdgeId, NodeId, RoadNetwork, Route};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attention {
    Careful,
    Distracted,
}

/// Car-following and yielding parameters shared by all drivers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    pub accel: f64,
    pub comfortable_brake: f64,
    pub emergency_brake: f64,
    /// Standstill distance kept to a leader.
    pub min_gap: f64,
    pub length: f64,
    /// Careful drivers start checking right of way this far from the stop
    /// line.
    pub lookahead: f64,
    /// Extra time a careful driver wants between clearing the box and the
    /// earliest arrival of a vehicle it must yield to.
    pub gap_margin: f64,
    /// Waiting time after which a fully stopped intersection is unlocked.
    pub deadlock_wait: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            accel: 2.5,
            comfortable_brake: 4.0,
            emergency_brake: 8.0,
            min_gap: 2.0,
            length: 4.5,
            lookahead: 30.0,
            gap_margin: 1.0,
            deadlock_wait: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VehicleState {
    pub id: VehicleId,
    pub edge: EdgeId,
    pub pos: f64,
    pub speed: f64,
    pub route: Route,
    /// Route of the trip that follows, drawn ahead so the exit at the last
    /// node is known while approaching it.
    pub next_route: Route,
    /// Index of `edge` within `route`.
    pub cursor: usize,
    /// Edge driven before the current one, if any.
    pub prev_edge: Option<EdgeId>,
    pub attention: Attention,
    pub icrw_forced_careful: bool,
    pub odometer: f64,
    pub trip_clock: f64,
    pub trip_start: f64,
    /// Last risk level reported by the warning application on this approach.
    pub last_risk: RiskLevel,
    /// Time spent at standstill in front of the stop line.
    pub waiting: f64,
    pub yielding: bool,
    /// Set when this vehicle was picked to break a standstill at a node.
    pub deadlock_pass: Option<NodeId>,
    /// CAM schedule offset, in steps.
    pub cam_phase: u64,
    route_rng: ChaCha8Rng,
    reaction_rng: ChaCha8Rng,
}

impl VehicleState {
    /// A vehicle at standstill just past the start box of `first`.
    pub fn spawn(
        id: VehicleId,
        first: EdgeId,
        net: &RoadNetwork,
        seed: u64,
        now: f64,
        attention: Attention,
        params: &DriverParams,
    ) -> Self {
        let mut route_rng = rng::stream(seed, "route", &[id.0]);
        let route = route_from(net, first, &mut route_rng);
        let next_route = follow_on(net, &route, &mut route_rng);
        Self {
            id,
            edge: first,
            pos: spawn_offset(net, params),
            speed: 0.0,
            route,
            next_route,
            cursor: 0,
            prev_edge: None,
            attention,
            icrw_forced_careful: false,
            odometer: 0.0,
            trip_clock: 0.0,
            trip_start: now,
            last_risk: RiskLevel::Idle,
            waiting: 0.0,
            yielding: false,
            deadlock_pass: None,
            cam_phase: 0,
            route_rng,
            reaction_rng: rng::stream(seed, "reaction", &[id.0]),
        }
    }

    /// Careful by nature or made careful by a warning.
    pub fn is_careful(&self) -> bool {
        self.attention == Attention::Careful || self.icrw_forced_careful
    }

    pub fn next_node(&self, net: &RoadNetwork) -> NodeId {
        net.edge(self.edge).to
    }

    /// Distance from the front bumper to the stop line (negative once inside
    /// the box).
    pub fn dist_to_stop_line(&self, net: &RoadNetwork) -> f64 {
        net.stop_line(self.edge) - self.pos
    }

    pub fn next_edge(&self) -> Option<EdgeId> {
        Some(self.route.edges.get(self.cursor + 1).copied().unwrap_or(self.next_route.first()))
    }

    pub fn heading(&self, net: &RoadNetwork) -> f64 {
        net.edge(self.edge).dir.heading()
    }

    pub fn position(&self, net: &RoadNetwork) -> crate::geometry::Point {
        net.position(self.edge, self.pos)
    }

    /// Conflict box currently overlapped, with the approach the vehicle
    /// entered it from and the edge it leaves by.
    pub fn box_movement(&self, net: &RoadNetwork, params: &DriverParams) -> Option<(NodeId, EdgeId, Option<EdgeId>)> {
        self.box_occupancy(net, params).map(|(node, approach)| {
            let exit = if approach == self.edge { self.next_edge() } else { Some(self.edge) };
            (node, approach, exit)
        })
    }

    /// Conflict box currently overlapped, with the approach the vehicle
    /// entered it from.
    pub fn box_occupancy(&self, net: &RoadNetwork, params: &DriverParams) -> Option<(NodeId, EdgeId)> {
        let h = net.box_half();
        let e = net.edge(self.edge);
        if self.pos > e.length - h {
            return Some((e.to, self.edge));
        }
        match self.prev_edge {
            Some(prev) if self.pos - params.length < h => Some((e.from, prev)),
            _ => None,
        }
    }
}

fn follow_on<R: rand::Rng>(net: &RoadNetwork, route: &Route, rng: &mut R) -> Route {
    let last = *route.edges.last().expect("routes are never empty");
    route_from(net, random_turn(net, net.edge(last).to, Some(last), rng), rng)
}

/// Where a freshly spawned vehicle's front bumper sits on its first edge:
/// the rear is just clear of the start node's box.
pub fn spawn_offset(net: &RoadNetwork, params: &DriverParams) -> f64 {
    net.box_half() + params.length
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leader {
    /// Bumper-to-bumper distance.
    pub gap: f64,
    pub speed: f64,
}

/// Safe-gap car following: accelerate at `accel` towards `v_max`, but never
/// faster than the speed from which the follower could still stop behind
/// the leader's stopping point with comfortable braking. Commands are
/// bounded to `[-emergency_brake, accel]`.
pub fn car_follow_accel(v: f64, leader: Option<Leader>, v_max: f64, p: &DriverParams, dt: f64) -> f64 {
    let mut target = (v + p.accel * dt).min(v_max);
    if let Some(l) = leader {
        if l.gap <= 0.0 {
            return -p.emergency_brake;
        }
        target = target.min(safe_speed(l.gap - p.min_gap, l.speed, p.comfortable_brake, dt));
    }
    ((target - v) / dt).clamp(-p.emergency_brake, p.accel)
}

/// Largest speed from which, after one step of reaction, braking at `b`
/// stops within `room + leader_speed² / 2b`.
fn safe_speed(room: f64, leader_speed: f64, b: f64, tau: f64) -> f64 {
    let disc = (b * tau).powi(2) + leader_speed.powi(2) + 2.0 * b * room;
    if disc <= 0.0 {
        0.0
    } else {
        (-b * tau + disc.sqrt()).max(0.0)
    }
}

/// Yielding vehicles aim to stop this far short of the stop line.
pub const STOP_MARGIN: f64 = 0.3;

/// Deceleration that brings the vehicle to rest just before the stop line
/// `dist` ahead.
pub fn stop_line_accel(v: f64, dist: f64, p: &DriverParams, dt: f64) -> f64 {
    if dist <= STOP_MARGIN {
        return -p.emergency_brake;
    }
    let target = safe_speed(dist - STOP_MARGIN, 0.0, p.comfortable_brake, dt);
    ((target.min(v + p.accel * dt) - v) / dt).clamp(-p.emergency_brake, p.accel)
}

/// Shortest distance in which `v` can be brought to rest at the emergency
/// deceleration.
pub fn emergency_stop_distance(v: f64, p: &DriverParams) -> f64 {
    v * v / (2.0 * p.emergency_brake)
}

/// Minimum time to cover `d` metres from speed `v`, accelerating at `a` up
/// to `v_max`.
pub fn time_to_cover(d: f64, v: f64, a: f64, v_max: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let v = v.min(v_max);
    let t_acc = (v_max - v) / a;
    let d_acc = v * t_acc + 0.5 * a * t_acc * t_acc;
    if d <= d_acc {
        (-v + (v * v + 2.0 * a * d).sqrt()) / a
    } else {
        t_acc + (d - d_acc) / v_max
    }
}

/// A vehicle near a node, as seen by a careful driver at that node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproachInfo {
    pub id: VehicleId,
    pub approach: EdgeId,
    /// Edge taken out of the node, if the route continues.
    pub exit: Option<EdgeId>,
    /// Distance to the stop line; negative inside the box.
    pub dist: f64,
    pub speed: f64,
    pub v_max: f64,
    pub in_box: bool,
    pub careful: bool,
    /// Cannot stop before the box any more.
    pub committed: bool,
    /// Careful, at rest at the stop line and yielding for a while.
    pub stalled: bool,
    pub deadlock_pass: bool,
}

impl ApproachInfo {
    pub fn of(s: &VehicleState, net: &RoadNetwork, p: &DriverParams, v_max: f64) -> Option<(NodeId, Self)> {
        let (node, approach, in_box, dist, exit) = match s.box_occupancy(net, p) {
            Some((node, approach)) => {
                if approach == s.edge {
                    (node, approach, true, s.dist_to_stop_line(net), s.next_edge())
                } else {
                    (node, approach, true, -(net.box_half() + s.pos), Some(s.edge))
                }
            }
            None => (s.next_node(net), s.edge, false, s.dist_to_stop_line(net), s.next_edge()),
        };
        Some((
            node,
            Self {
                id: s.id,
                approach,
                exit,
                dist,
                speed: s.speed,
                v_max,
                in_box,
                careful: s.is_careful(),
                committed: !in_box && !s.yielding && s.speed > 0.5 && dist < emergency_stop_distance(s.speed, p) + 0.5,
                stalled: s.is_careful() && s.yielding && s.waiting >= p.deadlock_wait && !in_box && dist < STOP_MARGIN + 0.5,
                deadlock_pass: s.deadlock_pass == Some(node),
            },
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Proceed,
    Yield,
}

/// Right-of-way decision for `me` at its next node.
///
/// Distracted drivers (not forced careful by the warning application)
/// always proceed. Careful drivers yield to any conflicting vehicle inside
/// the box, and to any conflicting vehicle that has priority over them (or
/// can no longer stop) and could reach the box before they would have
/// cleared it. Only movements that can meet in the box count. Vehicles
/// queued behind a standing vehicle on the same
/// approach are ignored. `exit_blocked` reports a standing queue right behind the box
/// on the edge they are about to enter.
pub fn yield_decision(
    me: &ApproachInfo,
    approaching: &[ApproachInfo],
    net: &RoadNetwork,
    p: &DriverParams,
    exit_blocked: bool,
) -> Decision {
    if !me.careful || me.in_box {
        return Decision::Proceed;
    }
    if exit_blocked {
        return Decision::Yield;
    }
    let me_clear = time_to_cover(me.dist.max(0.0) + net.box_side() + p.length, me.speed, p.accel, me.v_max);
    for o in approaching {
        if o.id == me.id || !net.movements_conflict((o.approach, o.exit), (me.approach, me.exit)) {
            continue;
        }
        if o.in_box {
            return Decision::Yield;
        }
        if me.deadlock_pass && o.stalled {
            continue;
        }
        let queued = approaching
            .iter()
            .any(|l| l.approach == o.approach && !l.in_box && l.dist < o.dist && l.speed < 0.5);
        if queued {
            continue;
        }
        if !(net.has_priority(o.approach, me.approach) || o.committed) {
            continue;
        }
        let o_arrival = time_to_cover(o.dist.max(0.0), o.speed, p.accel, o.v_max);
        if o_arrival < me_clear + p.gap_margin {
            return Decision::Yield;
        }
    }
    Decision::Proceed
}

/// What a warning or alarm did to a driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Reaction {
    pub warning_onset: bool,
    pub alarm_onset: bool,
}

/// React to the warning application's output. A warning makes a distracted
/// driver careful with probability 1/2, drawn once when the warning episode
/// starts; an alarm always does. IDLE changes nothing.
pub fn apply_driver_reaction(state: &mut VehicleState, risk: &RiskAssessment) -> Reaction {
    let mut out = Reaction::default();
    match risk.level {
        RiskLevel::Idle => {}
        RiskLevel::Warning => {
            if state.last_risk == RiskLevel::Idle {
                out.warning_onset = true;
                if !state.icrw_forced_careful && state.reaction_rng.random_bool(0.5) {
                    state.icrw_forced_careful = true;
                }
            }
        }
        RiskLevel::Alarm => {
            if state.last_risk != RiskLevel::Alarm {
                out.alarm_onset = true;
            }
            state.icrw_forced_careful = true;
        }
    }
    state.last_risk = risk.level;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub time: f64,
    pub node: NodeId,
    pub vehicles: (VehicleId, VehicleId),
}

/// One event per unordered pair of vehicles inside the same conflict box
/// that entered it from non-aligned approaches.
pub fn detect_collisions(
    states: &[VehicleState],
    net: &RoadNetwork,
    p: &DriverParams,
    time: f64,
) -> Vec<CollisionEvent> {
    let mut inside: Vec<(NodeId, (EdgeId, Option<EdgeId>), VehicleId)> = states
        .iter()
        .filter_map(|s| s.box_movement(net, p).map(|(n, e, x)| (n, (e, x), s.id)))
        .collect();
    inside.sort_by_key(|&(n, _, id)| (n, id));
    let mut events = Vec::new();
    for (i, a) in inside.iter().enumerate() {
        for b in inside[i + 1..].iter().take_while(|b| b.0 == a.0) {
            if net.movements_conflict(a.1, b.1) {
                events.push(CollisionEvent {
                    time,
                    node: a.0,
                    vehicles: (a.2.min(b.2), a.2.max(b.2)),
                });
            }
        }
    }
    events
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripOutcome {
    Completed,
    Crashed,
    InProgress,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripSample {
    pub vehicle: VehicleId,
    pub start: f64,
    pub end: f64,
    pub distance: f64,
    pub duration: f64,
    pub outcome: TripOutcome,
}

impl VehicleState {
    /// Close the current trip.
    pub fn close_trip(&self, now: f64, outcome: TripOutcome) -> TripSample {
        TripSample {
            vehicle: self.id,
            start: self.trip_start,
            end: now,
            distance: self.odometer,
            duration: self.trip_clock,
            outcome,
        }
    }

    /// Integrate one step with acceleration `accel`, handing the vehicle
    /// over to the next edge at nodes. Finishing the route closes a trip and
    /// draws a new route from the arrival node. `now` is the time at the end
    /// of the step.
    pub fn advance(&mut self, accel: f64, net: &RoadNetwork, v_max: f64, dt: f64, now: f64) -> Option<TripSample> {
        let limit = v_max.min(net.edge(self.edge).speed_limit);
        self.speed = (self.speed + accel * dt).clamp(0.0, limit);
        let ds = self.speed * dt;
        self.pos += ds;
        self.odometer += ds;
        self.trip_clock += dt;
        let mut finished = None;
        while self.pos >= net.edge(self.edge).length {
            let len = net.edge(self.edge).length;
            let next = match self.route.edges.get(self.cursor + 1) {
                Some(&e) => {
                    self.cursor += 1;
                    e
                }
                None => {
                    // Route done: the overshoot belongs to the next trip.
                    let over = self.pos - len;
                    self.odometer -= over;
                    finished = Some(self.close_trip(now, TripOutcome::Completed));
                    let upcoming = follow_on(net, &self.next_route, &mut self.route_rng);
                    self.route = std::mem::replace(&mut self.next_route, upcoming);
                    self.cursor = 0;
                    self.odometer = over;
                    self.trip_clock = 0.0;
                    self.trip_start = now;
                    self.route.first()
                }
            };
            self.prev_edge = Some(self.edge);
            self.edge = next;
            self.pos -= len;
            // Crossing an intersection ends any forced carefulness.
            self.icrw_forced_careful = false;
            self.last_risk = RiskLevel::Idle;
            self.deadlock_pass = None;
            self.waiting = 0.0;
            self.yielding = false;
        }
        finished
    }
}

/// Per-edge ordering of vehicles, used for leader lookup.
pub struct EdgeOccupancy {
    by_edge: Vec<Vec<(f64, usize)>>,
}

impl EdgeOccupancy {
    pub fn new(states: &[VehicleState], net: &RoadNetwork) -> Self {
        let mut by_edge = vec![Vec::new(); net.edges().len()];
        for (i, s) in states.iter().enumerate() {
            by_edge[s.edge].push((s.pos, i));
        }
        for v in &mut by_edge {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self { by_edge }
    }

    /// Rearmost vehicle on `edge`.
    pub fn last_on(&self, edge: EdgeId) -> Option<usize> {
        self.by_edge[edge].first().map(|&(_, i)| i)
    }

    pub fn is_empty(&self, edge: EdgeId) -> bool {
        self.by_edge[edge].is_empty()
    }

    /// Vehicle directly ahead of `states[idx]`, on the same edge or on the
    /// next edge of its route.
    pub fn leader(&self, idx: usize, states: &[VehicleState], net: &RoadNetwork, p: &DriverParams) -> Option<Leader> {
        let s = &states[idx];
        let lane = &self.by_edge[s.edge];
        let me = lane.iter().position(|&(_, i)| i == idx)?;
        if let Some(&(pos, j)) = lane.get(me + 1) {
            return Some(Leader {
                gap: pos - p.length - s.pos,
                speed: states[j].speed,
            });
        }
        let next = s.next_edge()?;
        let &(pos, j) = self.by_edge[next].first()?;
        Some(Leader {
            gap: net.edge(s.edge).length - s.pos + pos - p.length,
            speed: states[j].speed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_grid;
    use crate::geometry::Point;

    const DT: f64 = 0.1;

    #[test]
    fn cruise_is_a_fixed_point() {
        let p = DriverParams::default();
        assert_eq!(car_follow_accel(13.9, None, 13.9, &p, DT), 0.0);
    }

    #[test]
    fn contact_means_full_braking() {
        let p = DriverParams::default();
        for (v, lv) in [(0.0, 0.0), (5.0, 10.0), (13.9, 0.0)] {
            let a = car_follow_accel(v, Some(Leader { gap: 0.0, speed: lv }), 13.9, &p, DT);
            assert_eq!(a, -p.emergency_brake);
        }
    }

    #[test]
    fn free_road_accelerates() {
        let p = DriverParams::default();
        let a = car_follow_accel(10.0, None, 13.9, &p, DT);
        assert!(a > 0.0 && a <= p.accel);
        assert_eq!(a, 2.5);
    }

    #[test]
    fn follower_never_closes_below_standstill_gap() {
        // Leader brakes hard to a stop, follower reacts each step.
        let p = DriverParams::default();
        let (mut lx, mut lv) = (30.0, 13.9);
        let (mut fx, mut fv) = (0.0, 13.9);
        for _ in 0..200 {
            lv = (lv - p.comfortable_brake * DT).max(0.0);
            lx += lv * DT;
            let a = car_follow_accel(fv, Some(Leader { gap: lx - p.length - fx, speed: lv }), 13.9, &p, DT);
            fv = (fv + a * DT).max(0.0);
            fx += fv * DT;
            assert!(lx - p.length - fx > 0.0);
        }
        assert!(lx - p.length - fx >= p.min_gap - 0.5);
    }

    #[test]
    fn time_to_cover_cases() {
        assert_eq!(time_to_cover(0.0, 5.0, 2.5, 13.9), 0.0);
        assert!((time_to_cover(100.0, 10.0, 2.5, 10.0) - 10.0).abs() < 1e-12);
        // from rest, 5 m at 2.5 m/s² → 2 s
        assert!((time_to_cover(5.0, 0.0, 2.5, 13.9) - 2.0).abs() < 1e-12);
    }

    fn info(net: &RoadNetwork, approach: EdgeId, dist: f64, speed: f64, careful: bool, id: u64) -> ApproachInfo {
        let _ = net;
        ApproachInfo {
            id: VehicleId(id),
            approach,
            exit: None,
            dist,
            speed,
            v_max: 13.9,
            in_box: dist < 0.0,
            careful,
            committed: false,
            stalled: false,
            deadlock_pass: false,
        }
    }

    fn centre_approaches(net: &RoadNetwork) -> (EdgeId, EdgeId) {
        // grid 2x2 period 2: row 1 and column 1 are minor, the centre node is
        // minor x minor; use a period-2 4x4 grid node (1, 2): column 1 minor,
        // row 2 major.
        let node = 2 * 5 + 1;
        let into = net.in_edges(node);
        let minor = *into.iter().find(|&&e| net.edge(e).dir.y > 0.5).unwrap();
        let major = *into.iter().find(|&&e| net.edge(e).dir.x < -0.5).unwrap();
        (minor, major)
    }

    #[test]
    fn distracted_driver_ignores_right_of_way() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        let p = DriverParams::default();
        let (minor, major) = centre_approaches(&net);
        let me = info(&net, minor, 20.0, 10.0, false, 1);
        let other = info(&net, major, 13.9, 13.9, false, 2);
        assert_eq!(yield_decision(&me, &[me, other], &net, &p, false), Decision::Proceed);
    }

    #[test]
    fn careful_minor_yields_to_major() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        let p = DriverParams::default();
        let (minor, major) = centre_approaches(&net);
        let me = info(&net, minor, 20.0, 10.0, true, 1);
        let other = info(&net, major, 15.0, 13.9, false, 2);
        assert_eq!(yield_decision(&me, &[me, other], &net, &p, false), Decision::Yield);
    }

    #[test]
    fn careful_at_empty_intersection_proceeds() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        let p = DriverParams::default();
        let (minor, _) = centre_approaches(&net);
        let me = info(&net, minor, 20.0, 10.0, true, 1);
        assert_eq!(yield_decision(&me, &[me], &net, &p, false), Decision::Proceed);
    }

    #[test]
    fn careful_major_does_not_yield_to_minor() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        let p = DriverParams::default();
        let (minor, major) = centre_approaches(&net);
        let me = info(&net, major, 20.0, 10.0, true, 1);
        let other = info(&net, minor, 15.0, 5.0, true, 2);
        assert_eq!(yield_decision(&me, &[me, other], &net, &p, false), Decision::Proceed);
    }

    fn vehicle(net: &RoadNetwork, id: u64, edge: EdgeId, pos: f64, prev: Option<EdgeId>) -> VehicleState {
        let p = DriverParams::default();
        let mut s = VehicleState::spawn(VehicleId(id), edge, net, 1, 0.0, Attention::Distracted, &p);
        s.pos = pos;
        s.prev_edge = prev;
        s
    }

    #[test]
    fn perpendicular_pair_in_box_collides_once() {
        let net = build_grid(2, 2, 100.0, 2).unwrap();
        let (into, _) = (net.in_edges(4), ());
        let north = *into.iter().find(|&&e| net.edge(e).dir.y > 0.5).unwrap();
        let west = *into.iter().find(|&&e| net.edge(e).dir.x < -0.5).unwrap();
        let straight = |e: EdgeId| {
            let d = net.edge(e).dir;
            *net.out_edges(4).iter().find(|&&o| net.edge(o).dir.dot(d) > 0.5).unwrap()
        };
        let mut a = vehicle(&net, 1, north, 98.0, None);
        let mut b = vehicle(&net, 2, west, 97.0, None);
        a.route = Route { edges: vec![north, straight(north)] };
        a.cursor = 0;
        b.route = Route { edges: vec![west, straight(west)] };
        b.cursor = 0;
        let ev = detect_collisions(&[a, b], &net, &DriverParams::default(), 3.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].node, 4);
        assert_eq!(ev[0].vehicles, (VehicleId(1), VehicleId(2)));
    }

    #[test]
    fn three_in_the_box_gives_one_event_per_crossing_pair() {
        let net = build_grid(2, 2, 100.0, 2).unwrap();
        let into = net.in_edges(4);
        let by_dir = |x: f64, y: f64| {
            *into
                .iter()
                .find(|&&e| net.edge(e).dir.dot(Point::new(x, y)) > 0.5)
                .unwrap()
        };
        let straight = |e: EdgeId| {
            let d = net.edge(e).dir;
            *net.out_edges(4).iter().find(|&&o| net.edge(o).dir.dot(d) > 0.5).unwrap()
        };
        let mut vs = Vec::new();
        for (id, e) in [(1, by_dir(0.0, 1.0)), (2, by_dir(-1.0, 0.0)), (3, by_dir(0.0, -1.0))] {
            let mut v = vehicle(&net, id, e, net.edge(e).length - 2.0, None);
            v.route = Route { edges: vec![e, straight(e)] };
            v.cursor = 0;
            vs.push(v);
        }
        let ev = detect_collisions(&vs, &net, &DriverParams::default(), 3.0);
        let pairs: Vec<_> = ev.iter().map(|e| e.vehicles).collect();
        // the two opposite vehicles pass each other
        assert_eq!(pairs, vec![(VehicleId(1), VehicleId(2)), (VehicleId(2), VehicleId(3))]);
    }

    #[test]
    fn warning_converts_half_the_episodes() {
        let net = build_grid(2, 2, 100.0, 2).unwrap();
        let p = DriverParams::default();
        let mut s = VehicleState::spawn(VehicleId(7), 0, &net, 11, 0.0, Attention::Distracted, &p);
        let at = |level| RiskAssessment { level, ..RiskAssessment::idle() };
        let episodes = 10_000;
        let mut converted = 0;
        for _ in 0..episodes {
            s.icrw_forced_careful = false;
            assert!(apply_driver_reaction(&mut s, &at(RiskLevel::Warning)).warning_onset);
            // staying in the warning does not draw again
            let before = s.icrw_forced_careful;
            apply_driver_reaction(&mut s, &at(RiskLevel::Warning));
            assert_eq!(s.icrw_forced_careful, before);
            converted += s.icrw_forced_careful as u32;
            apply_driver_reaction(&mut s, &at(RiskLevel::Idle));
        }
        let frac = converted as f64 / episodes as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        s.icrw_forced_careful = false;
        assert!(apply_driver_reaction(&mut s, &at(RiskLevel::Alarm)).alarm_onset);
        assert!(s.icrw_forced_careful);
    }

    #[test]
    fn queue_through_box_is_not_a_collision() {
        let net = build_grid(2, 2, 100.0, 2).unwrap();
        let north_in = *net.in_edges(4).iter().find(|&&e| net.edge(e).dir.y > 0.5).unwrap();
        let north_out = *net.out_edges(4).iter().find(|&&e| net.edge(e).dir.y > 0.5).unwrap();
        let leader = vehicle(&net, 1, north_out, 3.0, Some(north_in));
        let follower = vehicle(&net, 2, north_in, 97.0, None);
        let ev = detect_collisions(&[leader, follower], &net, &DriverParams::default(), 1.0);
        assert!(ev.is_empty());
    }

    #[test]
    fn forced_carefulness_clears_after_crossing() {
        let net = build_grid(2, 2, 100.0, 2).unwrap();
        let p = DriverParams::default();
        let mut s = VehicleState::spawn(VehicleId(1), 0, &net, 3, 0.0, Attention::Distracted, &p);
        s.icrw_forced_careful = true;
        s.pos = net.edge(0).length - 0.5;
        s.speed = 10.0;
        s.advance(0.0, &net, 13.9, DT, DT);
        assert!(!s.icrw_forced_careful);
        assert_eq!(s.prev_edge, Some(0));
    }
}
