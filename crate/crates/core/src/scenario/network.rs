use crate::geometry::{Point, Rect};
use serde::{Deserialize, Serialize};

use super::ScenarioError;

pub type NodeId = usize;
pub type EdgeId = usize;

/// 50 km/h.
pub const DEFAULT_SPEED_LIMIT: f64 = 50.0 / 3.6;
pub const DEFAULT_BOX_SIDE: f64 = 8.0;

/// Approach directions whose unit vectors have |cos| above this are treated
/// as the same street axis.
const ALIGNED_COS: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Major,
    Minor,
}

/// How right of way is resolved between two conflicting approaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityRule {
    /// Major roads beat minor ones; equal classes yield to the right.
    MajorThenRight,
    /// Road class is ignored; everybody yields to the right.
    RightOnly,
}

/// Manoeuvre through a node, right-hand traffic. U-turns count as left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Turn {
    Straight,
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub pos: Point,
    pub rule: PriorityRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: NodeId,
    pub to: NodeId,
    pub speed_limit: f64,
    pub class: RoadClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
    pub speed_limit: f64,
    pub class: RoadClass,
    /// Unit direction of travel.
    pub dir: Point,
}

/// Directed single-lane road graph with square conflict boxes at every node.
#[derive(Clone, Debug)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    box_side: f64,
    buildings: Vec<Rect>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    reverse: Vec<Option<EdgeId>>,
}

impl RoadNetwork {
    pub fn new(
        nodes: Vec<Node>,
        specs: Vec<EdgeSpec>,
        box_side: f64,
        buildings: Vec<Rect>,
    ) -> Result<Self, ScenarioError> {
        if nodes.is_empty() {
            return Err(ScenarioError::Network("network has no nodes".into()));
        }
        let mut edges = Vec::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            if s.from >= nodes.len() || s.to >= nodes.len() {
                return Err(ScenarioError::Network(format!(
                    "edge {i} references a missing node ({} -> {})",
                    s.from, s.to
                )));
            }
            if !(s.speed_limit > 0.0) {
                return Err(ScenarioError::Network(format!(
                    "edge {i} has non-positive speed limit"
                )));
            }
            let delta = nodes[s.to].pos - nodes[s.from].pos;
            let length = delta.norm();
            if !(length > 0.0) {
                return Err(ScenarioError::Network(format!("edge {i} has zero length")));
            }
            edges.push(Edge {
                from: s.from,
                to: s.to,
                length,
                speed_limit: s.speed_limit,
                class: s.class,
                dir: delta.unit(),
            });
        }

        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        for (id, e) in edges.iter().enumerate() {
            out_edges[e.from].push(id);
            in_edges[e.to].push(id);
        }
        let reverse = edges
            .iter()
            .map(|e| out_edges[e.to].iter().copied().find(|&r| edges[r].to == e.from))
            .collect();

        if !(box_side > 0.0) {
            return Err(ScenarioError::Network("conflict box side must be positive".into()));
        }
        if let Some(min_len) = edges.iter().map(|e| e.length).reduce(f64::min) {
            if box_side >= min_len {
                return Err(ScenarioError::Network(format!(
                    "conflict box side {box_side} m must be shorter than the shortest edge ({min_len} m)"
                )));
            }
        }

        let net = Self {
            nodes,
            edges,
            box_side,
            buildings,
            out_edges,
            in_edges,
            reverse,
        };
        if !net.strongly_connected() {
            return Err(ScenarioError::Network("road graph is not strongly connected".into()));
        }
        Ok(net)
    }

    fn strongly_connected(&self) -> bool {
        let reach = |adj: &dyn Fn(NodeId) -> Vec<NodeId>| {
            let mut seen = vec![false; self.nodes.len()];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(n) = stack.pop() {
                for m in adj(n) {
                    if !seen[m] {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        let fwd = |n: NodeId| self.out_edges[n].iter().map(|&e| self.edges[e].to).collect();
        let bwd = |n: NodeId| self.in_edges[n].iter().map(|&e| self.edges[e].from).collect();
        reach(&fwd) && reach(&bwd)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn box_half(&self) -> f64 {
        0.5 * self.box_side
    }

    pub fn buildings(&self) -> &[Rect] {
        &self.buildings
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.in_edges[node]
    }

    pub fn reverse(&self, edge: EdgeId) -> Option<EdgeId> {
        self.reverse[edge]
    }

    /// Number of distinct roads meeting at a node (in- and out-edges to the
    /// same neighbour count once).
    pub fn degree(&self, node: NodeId) -> usize {
        let mut nbrs: Vec<NodeId> = self.out_edges[node]
            .iter()
            .map(|&e| self.edges[e].to)
            .chain(self.in_edges[node].iter().map(|&e| self.edges[e].from))
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        nbrs.len()
    }

    /// Distance along `edge` at which the conflict box of its end node starts.
    pub fn stop_line(&self, edge: EdgeId) -> f64 {
        self.edges[edge].length - self.box_half()
    }

    pub fn position(&self, edge: EdgeId, s: f64) -> Point {
        let e = &self.edges[edge];
        self.nodes[e.from].pos + e.dir * s
    }

    /// Both approaches run along the same street axis (same or opposite
    /// direction).
    pub fn aligned(&self, a: EdgeId, b: EdgeId) -> bool {
        self.edges[a].dir.dot(self.edges[b].dir).abs() > ALIGNED_COS
    }

    /// Two distinct approaches into the same node whose paths cross.
    pub fn conflicting(&self, a: EdgeId, b: EdgeId) -> bool {
        a != b && !self.aligned(a, b)
    }

    /// Manoeuvre from `approach` onto `exit`; no exit means straight on.
    pub fn turn(&self, approach: EdgeId, exit: Option<EdgeId>) -> Turn {
        let Some(exit) = exit else {
            return Turn::Straight;
        };
        let (a, b) = (self.edges[approach].dir, self.edges[exit].dir);
        let cos = a.dot(b);
        if cos > ALIGNED_COS {
            Turn::Straight
        } else if cos < -ALIGNED_COS || a.cross(b) > 0.0 {
            Turn::Left
        } else {
            Turn::Right
        }
    }

    /// Whether two movements `(approach, exit)` through the same node can
    /// meet inside its box. Only crossing streets conflict: their vehicles
    /// meet unless one of them turns right without merging into the other's
    /// exit.
    pub fn movements_conflict(&self, a: (EdgeId, Option<EdgeId>), b: (EdgeId, Option<EdgeId>)) -> bool {
        if !self.conflicting(a.0, b.0) {
            return false;
        }
        if a.1.is_some() && a.1 == b.1 {
            return true;
        }
        self.turn(a.0, a.1) != Turn::Right && self.turn(b.0, b.1) != Turn::Right
    }

    /// Whether approach `a` has right of way over approach `b`. Both must be
    /// incoming edges of the same node. The relation is total and
    /// antisymmetric over distinct approaches.
    pub fn has_priority(&self, a: EdgeId, b: EdgeId) -> bool {
        if a == b {
            return false;
        }
        let (ea, eb) = (&self.edges[a], &self.edges[b]);
        debug_assert_eq!(ea.to, eb.to, "approaches must share a node");
        let rule = self.nodes[ea.to].rule;
        if rule == PriorityRule::MajorThenRight && ea.class != eb.class {
            return ea.class == RoadClass::Major;
        }
        // `a` comes from b's right when b's heading rotated a quarter turn
        // counter-clockwise points along a's heading.
        let c = eb.dir.cross(ea.dir);
        if c.abs() > 1e-9 {
            return c > 0.0;
        }
        a < b
    }

    /// True when some conflicting approach into the same node has right of
    /// way over `edge`.
    pub fn lacks_priority(&self, edge: EdgeId) -> bool {
        let node = self.edges[edge].to;
        self.in_edges[node]
            .iter()
            .any(|&o| self.conflicting(o, edge) && self.has_priority(o, edge))
    }

    /// Map a reported position and heading onto one of the approaches into
    /// `node`. Returns the approach edge and the longitudinal position along
    /// it (which may exceed the edge length for extrapolated positions).
    /// Positions more than `overshoot` beyond the node centre have crossed
    /// already and map to nothing.
    pub fn approach_of(&self, node: NodeId, pos: Point, heading: Point, overshoot: f64) -> Option<(EdgeId, f64)> {
        const LATERAL_TOL: f64 = 2.0;
        let end = self.nodes[node].pos;
        let mut best: Option<(EdgeId, f64, f64)> = None;
        for &e in &self.in_edges[node] {
            let edge = &self.edges[e];
            if heading.dot(edge.dir) < ALIGNED_COS {
                continue;
            }
            let start = self.nodes[edge.from].pos;
            let rel = pos - start;
            let s = rel.dot(edge.dir);
            let lateral = rel.cross(edge.dir).abs();
            if lateral > LATERAL_TOL || s < -LATERAL_TOL {
                continue;
            }
            if (pos - end).dot(edge.dir) > overshoot {
                continue;
            }
            if best.map_or(true, |(_, _, l)| lateral < l) {
                best = Some((e, s, lateral));
            }
        }
        best.map(|(e, s, _)| (e, s))
    }

    /// Whether a vehicle at `pos` lies within `radius` of the node centre or
    /// on one of its approaches, counting up to `reach` metres upstream of
    /// the approach start. Heading is ignored, so this is a superset of the
    /// positions [`Self::approach_of`] can map after moving up to `reach`.
    pub fn near_approach(&self, node: NodeId, pos: Point, radius: f64, reach: f64) -> bool {
        const LATERAL_TOL: f64 = 2.0;
        let centre = self.nodes[node].pos;
        if pos.distance(centre) <= radius {
            return true;
        }
        self.in_edges[node].iter().any(|&e| {
            let edge = &self.edges[e];
            let rel = pos - self.nodes[edge.from].pos;
            let s = rel.dot(edge.dir);
            rel.cross(edge.dir).abs() <= LATERAL_TOL && s >= -LATERAL_TOL - reach && s <= edge.length + radius
        })
    }

    /// No building footprint blocks the straight line between `a` and `b`.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        !self.buildings.iter().any(|r| r.blocks_segment(a, b))
    }
}
