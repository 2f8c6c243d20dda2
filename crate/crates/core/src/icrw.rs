//! Intersection collision risk warning: per-vehicle risk classification
//! from CAM-derived neighbour knowledge.

use crate::geometry::Point;
use crate::mobility::VehicleId;
use crate::scenario::{EdgeId, NodeId, RoadNetwork};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IcrwError {
    #[error("distance to the intersection must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("deceleration must be positive, got {0}")]
    InvalidDeceleration(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RiskLevel {
    #[default]
    Idle,
    Warning,
    Alarm,
}

impl RiskLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Idle => "IDLE",
            RiskLevel::Warning => "WARNING",
            RiskLevel::Alarm => "ALARM",
        }
    }
}

/// How the comfortable braking time is derived from speed and deceleration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrakeTimeModel {
    /// `v / 2a`: `TT > TB + RT` then reads `d > v·RT + v²/2a`.
    #[default]
    Half,
    /// `v / a`, the time to come to a full stop.
    Full,
}

/// Time for a vehicle `d` metres from the intersection to reach it at
/// constant speed `v`. A stationary vehicle never arrives.
pub fn time_to_intersection(d: f64, v: f64) -> Result<f64, IcrwError> {
    if d < 0.0 || d.is_nan() {
        return Err(IcrwError::NegativeDistance(d));
    }
    if v > 0.0 {
        Ok(d / v)
    } else {
        Ok(f64::INFINITY)
    }
}

pub fn brake_time(v: f64, a: f64) -> Result<f64, IcrwError> {
    brake_time_with(v, a, BrakeTimeModel::Half)
}

pub fn brake_time_with(v: f64, a: f64, model: BrakeTimeModel) -> Result<f64, IcrwError> {
    if !(a > 0.0) {
        return Err(IcrwError::InvalidDeceleration(a));
    }
    Ok(match model {
        BrakeTimeModel::Half => v / (2.0 * a),
        BrakeTimeModel::Full => v / a,
    })
}

/// Classify one approach. `tt_n` is infinite when there is no conflicting
/// neighbour.
pub fn classify_risk(tt_v: f64, tt_n: f64, tb_v: f64, rt: f64, alarm: f64, warning: f64) -> RiskLevel {
    let dtt = (tt_v - tt_n).abs();
    // Two infinite times (both at rest) give NaN and no risk.
    if dtt.is_nan() || dtt > warning {
        RiskLevel::Idle
    } else if dtt > alarm || tt_v - tb_v - rt > 0.0 {
        RiskLevel::Warning
    } else {
        RiskLevel::Alarm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub id: VehicleId,
    pub pos: Point,
    pub speed: f64,
    /// Heading in radians, counter-clockwise from +x.
    pub heading: f64,
    pub timestamp: f64,
}

impl NeighborRecord {
    /// Position extrapolated at constant speed and heading to `now`.
    pub fn dead_reckon(&self, now: f64) -> Point {
        self.pos + Point::from_heading(self.heading) * (self.speed * (now - self.timestamp).max(0.0))
    }

    pub fn expired(&self, now: f64, ttl: f64) -> bool {
        now - self.timestamp > ttl
    }
}

/// Latest CAM content per sender, as known by one receiver.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborTable {
    records: BTreeMap<VehicleId, NeighborRecord>,
}

impl NeighborTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: VehicleId) -> Option<&NeighborRecord> {
        self.records.get(&id)
    }

    /// Insert or replace the record of `rec.id`, keeping the newest.
    pub fn upsert(&mut self, rec: NeighborRecord) {
        match self.records.get(&rec.id) {
            Some(old) if old.timestamp > rec.timestamp => {}
            _ => {
                self.records.insert(rec.id, rec);
            }
        }
    }

    pub fn remove(&mut self, id: VehicleId) {
        self.records.remove(&id);
    }

    pub fn purge(&mut self, now: f64, ttl: f64) {
        self.records.retain(|_, r| !r.expired(now, ttl));
    }

    /// Records not older than `ttl`, in id order.
    pub fn fresh(&self, now: f64, ttl: f64) -> impl Iterator<Item = &NeighborRecord> {
        self.records.values().filter(move |r| !r.expired(now, ttl))
    }
}

/// A neighbour placed on an approach of the intersection ahead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConflictingNeighbor {
    pub record: NeighborRecord,
    pub approach: EdgeId,
    /// Estimated distance to the stop line, zero inside the box.
    pub distance: f64,
}

/// Among fresh neighbours on approaches of `node` with right of way over
/// `own`, return the one closest to the intersection. Neighbours count until
/// their front is `clearance` past the node centre; a turner heading back
/// along our street is still one of them.
pub fn select_conflicting_neighbor(
    node: NodeId,
    own: EdgeId,
    table: &NeighborTable,
    net: &RoadNetwork,
    now: f64,
    ttl: f64,
    clearance: f64,
) -> Option<ConflictingNeighbor> {
    let mut best: Option<ConflictingNeighbor> = None;
    for rec in table.fresh(now, ttl) {
        let pos = rec.dead_reckon(now);
        let Some((approach, s)) = net.approach_of(node, pos, Point::from_heading(rec.heading), clearance) else {
            continue;
        };
        // Own road: oncoming traffic before the centre and anything ahead in
        // our direction. Past the centre and heading our way means a turner
        // still inside the box.
        if net.aligned(approach, own) {
            let dir = net.edge(approach).dir;
            let past = (pos - net.node(node).pos).dot(dir) > 0.0;
            if !past || dir.dot(net.edge(own).dir) > 0.0 {
                continue;
            }
        } else if !net.has_priority(approach, own) {
            continue;
        }
        let distance = (net.stop_line(approach) - s).max(0.0);
        if best.as_ref().map_or(true, |b| distance < b.distance) {
            best = Some(ConflictingNeighbor {
                record: *rec,
                approach,
                distance,
            });
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcrwParams {
    pub alarm_threshold: f64,
    pub warning_threshold: f64,
    pub deceleration: f64,
    pub reaction_time: f64,
    pub brake_time: BrakeTimeModel,
    pub neighbor_ttl: f64,
    /// A neighbour has left the intersection once its front is this far
    /// past the box edge.
    pub vehicle_length: f64,
}

impl Default for IcrwParams {
    fn default() -> Self {
        Self {
            alarm_threshold: 1.0,
            warning_threshold: 2.0,
            deceleration: 4.0,
            reaction_time: 1.0,
            brake_time: BrakeTimeModel::Half,
            neighbor_ttl: 1.1,
            vehicle_length: 4.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub level: RiskLevel,
    pub tt_self: f64,
    pub tt_neighbor: Option<f64>,
    pub tb_self: f64,
    pub neighbor: Option<VehicleId>,
}

impl RiskAssessment {
    pub fn idle() -> Self {
        Self {
            level: RiskLevel::Idle,
            tt_self: f64::INFINITY,
            tt_neighbor: None,
            tb_self: 0.0,
            neighbor: None,
        }
    }
}

/// Run the warning application for a vehicle on `edge`, `dist` metres before
/// its stop line at speed `v`. Approaches with right of way always report
/// IDLE.
pub fn assess(
    edge: EdgeId,
    dist: f64,
    v: f64,
    table: &NeighborTable,
    net: &RoadNetwork,
    now: f64,
    p: &IcrwParams,
) -> Result<RiskAssessment, IcrwError> {
    if !net.lacks_priority(edge) {
        return Ok(RiskAssessment::idle());
    }
    let tt_self = time_to_intersection(dist.max(0.0), v)?;
    let tb_self = brake_time_with(v, p.deceleration, p.brake_time)?;
    let node = net.edge(edge).to;
    let Some(n) = select_conflicting_neighbor(node, edge, table, net, now, p.neighbor_ttl, net.box_half() + p.vehicle_length) else {
        return Ok(RiskAssessment {
            level: RiskLevel::Idle,
            tt_self,
            tt_neighbor: None,
            tb_self,
            neighbor: None,
        });
    };
    let tt_n = time_to_intersection(n.distance, n.record.speed)?;
    Ok(RiskAssessment {
        level: classify_risk(tt_self, tt_n, tb_self, p.reaction_time, p.alarm_threshold, p.warning_threshold),
        tt_self,
        tt_neighbor: Some(tt_n),
        tb_self,
        neighbor: Some(n.record.id),
    })
}
