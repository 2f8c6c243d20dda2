use super::network::{
    EdgeSpec, Node, PriorityRule, RoadClass, RoadNetwork, DEFAULT_BOX_SIDE, DEFAULT_SPEED_LIMIT,
};
use super::ScenarioError;
use crate::geometry::{Point, Rect};
use serde::{Deserialize, Serialize};

/// Parameters of a synthetic Manhattan grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_len: f64,
    /// Every `major_period`-th street (counting from 0) is a major road.
    pub major_period: usize,
    pub box_side: f64,
    pub speed_limit: f64,
    /// Distance from a street centreline to the building facades.
    pub setback: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            blocks_x: 5,
            blocks_y: 5,
            block_len: 100.0,
            major_period: 2,
            box_side: DEFAULT_BOX_SIDE,
            speed_limit: DEFAULT_SPEED_LIMIT,
            setback: DEFAULT_BOX_SIDE,
        }
    }
}

/// Build a `blocks_x` x `blocks_y` Manhattan grid with the default conflict
/// box, speed limit and building setback.
pub fn build_grid(
    blocks_x: usize,
    blocks_y: usize,
    block_len: f64,
    major_period: usize,
) -> Result<RoadNetwork, ScenarioError> {
    GridSpec {
        blocks_x,
        blocks_y,
        block_len,
        major_period,
        ..GridSpec::default()
    }
    .build()
}

impl GridSpec {
    pub fn build(&self) -> Result<RoadNetwork, ScenarioError> {
        if self.blocks_x < 2 || self.blocks_y < 2 {
            return Err(ScenarioError::Network(format!(
                "grid needs at least 2x2 blocks, got {}x{}",
                self.blocks_x, self.blocks_y
            )));
        }
        if !(self.block_len > 0.0) {
            return Err(ScenarioError::Network("block length must be positive".into()));
        }
        if self.major_period == 0 {
            return Err(ScenarioError::Network("major_period must be at least 1".into()));
        }
        if !(self.setback >= 0.0) || 2.0 * self.setback >= self.block_len {
            return Err(ScenarioError::Network(
                "building setback must leave a non-empty block".into(),
            ));
        }
        let cols = self.blocks_x + 1;
        let rows = self.blocks_y + 1;
        let id = |i: usize, j: usize| j * cols + i;

        let mut nodes = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            for i in 0..cols {
                nodes.push(Node {
                    pos: Point::new(i as f64 * self.block_len, j as f64 * self.block_len),
                    rule: PriorityRule::MajorThenRight,
                });
            }
        }
        let class_of = |street: usize| {
            if street % self.major_period == 0 {
                RoadClass::Major
            } else {
                RoadClass::Minor
            }
        };

        let mut specs = Vec::new();
        let mut link = |a: usize, b: usize, class: RoadClass| {
            for (from, to) in [(a, b), (b, a)] {
                specs.push(EdgeSpec {
                    from,
                    to,
                    speed_limit: self.speed_limit,
                    class,
                });
            }
        };
        for j in 0..rows {
            for i in 0..self.blocks_x {
                link(id(i, j), id(i + 1, j), class_of(j));
            }
        }
        for i in 0..cols {
            for j in 0..self.blocks_y {
                link(id(i, j), id(i, j + 1), class_of(i));
            }
        }

        let mut buildings = Vec::with_capacity(self.blocks_x * self.blocks_y);
        for j in 0..self.blocks_y {
            for i in 0..self.blocks_x {
                let x0 = i as f64 * self.block_len;
                let y0 = j as f64 * self.block_len;
                buildings.push(Rect::new(
                    Point::new(x0 + self.setback, y0 + self.setback),
                    Point::new(x0 + self.block_len - self.setback, y0 + self.block_len - self.setback),
                ));
            }
        }

        RoadNetwork::new(nodes, specs, self.box_side, buildings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_by_three_lattice() {
        let net = build_grid(2, 2, 100.0, 2).unwrap();
        assert_eq!(net.nodes().len(), 9);
        assert_eq!(net.edges().len(), 24);
        assert_eq!(net.degree(4), 4);
        assert_eq!(net.degree(0), 2);
        assert_eq!(net.degree(1), 3);
    }

    #[test]
    fn five_by_five_lattice_has_uniform_edges() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        assert_eq!(net.nodes().len(), 25);
        assert!(net.edges().iter().all(|e| (e.length - 100.0).abs() < 1e-12));
    }

    #[test]
    fn period_one_makes_every_street_major() {
        let net = build_grid(2, 2, 100.0, 1).unwrap();
        assert!(net.edges().iter().all(|e| e.class == RoadClass::Major));
        // With equal classes the approach from the right wins.
        let centre = 4;
        let into = net.in_edges(centre);
        let northbound = *into.iter().find(|&&e| net.edge(e).dir.y > 0.5).unwrap();
        let westbound = *into.iter().find(|&&e| net.edge(e).dir.x < -0.5).unwrap();
        // A westbound car arrives from the right of a northbound one.
        assert!(net.has_priority(westbound, northbound));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(build_grid(1, 3, 100.0, 2).is_err());
        assert!(build_grid(3, 1, 100.0, 2).is_err());
        assert!(build_grid(2, 2, 0.0, 2).is_err());
    }

    proptest! {
        #[test]
        fn build_grid_is_pure(bx in 2usize..6, by in 2usize..6, len in 20.0f64..300.0, period in 1usize..4) {
            let a = build_grid(bx, by, len, period).unwrap();
            let b = build_grid(bx, by, len, period).unwrap();
            prop_assert_eq!(a.edges(), b.edges());
            prop_assert_eq!(a.nodes(), b.nodes());
        }

        #[test]
        fn priorities_are_total(bx in 2usize..5, by in 2usize..5, period in 1usize..4) {
            let net = build_grid(bx, by, 100.0, period).unwrap();
            for n in 0..net.nodes().len() {
                let into = net.in_edges(n);
                for &a in into {
                    for &b in into {
                        if a != b {
                            prop_assert!(net.has_priority(a, b) ^ net.has_priority(b, a));
                        }
                    }
                }
            }
        }
    }
}
