use crate::geometry::Point;
use crate::scenario::RoadNetwork;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkClass {
    Los,
    Nlos,
}

/// Line of sight unless a building footprint blocks the direct path. On a
/// grid this makes two cars on the same street axis LOS, and a car inside an
/// intersection LOS to every street leaving it; cars on perpendicular
/// streets away from their shared corner are NLOS. Networks without
/// buildings are LOS everywhere.
pub fn classify_los(tx: Point, rx: Point, net: &RoadNetwork) -> LinkClass {
    if net.line_of_sight(tx, rx) {
        LinkClass::Los
    } else {
        LinkClass::Nlos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_grid;

    #[test]
    fn same_road_is_los() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        assert_eq!(
            classify_los(Point::new(20.0, 100.0), Point::new(380.0, 100.0), &net),
            LinkClass::Los
        );
    }

    #[test]
    fn perpendicular_streets_away_from_corner_are_nlos() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        // corner at (200, 200); one car 25 m west, the other 21 m north
        assert_eq!(
            classify_los(Point::new(175.0, 200.0), Point::new(200.0, 221.0), &net),
            LinkClass::Nlos
        );
    }

    #[test]
    fn car_inside_the_box_sees_every_street() {
        let net = build_grid(4, 4, 100.0, 2).unwrap();
        let inside = Point::new(203.0, 200.0);
        for other in [
            Point::new(200.0, 260.0),
            Point::new(200.0, 140.0),
            Point::new(120.0, 200.0),
            Point::new(290.0, 200.0),
        ] {
            assert_eq!(classify_los(inside, other, &net), LinkClass::Los);
        }
    }
}
