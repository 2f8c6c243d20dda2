use super::network::{EdgeId, NodeId, RoadNetwork};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Minimum route length, so that per-kilometre travel times are defined.
pub const MIN_ROUTE_LEN: f64 = 1000.0;

/// A connected sequence of directed edges; one route is one trip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub edges: Vec<EdgeId>,
}

impl Route {
    pub fn length(&self, net: &RoadNetwork) -> f64 {
        self.edges.iter().map(|&e| net.edge(e).length).sum()
    }

    pub fn first(&self) -> EdgeId {
        self.edges[0]
    }
}

/// Pick the next edge out of `node` uniformly at random, avoiding a U-turn
/// back along `arrived_on` unless it is the only way out.
pub fn random_turn<R: Rng + ?Sized>(
    net: &RoadNetwork,
    node: NodeId,
    arrived_on: Option<EdgeId>,
    rng: &mut R,
) -> EdgeId {
    let back = arrived_on.and_then(|e| net.reverse(e));
    let options: Vec<EdgeId> = net
        .out_edges(node)
        .iter()
        .copied()
        .filter(|&e| Some(e) != back)
        .collect();
    match options.choose(rng) {
        Some(&e) => e,
        None => back.expect("strongly connected graph has an out-edge"),
    }
}

/// Extend a route starting with `first` by random turns until it is at least
/// [`MIN_ROUTE_LEN`] long.
pub fn route_from<R: Rng + ?Sized>(net: &RoadNetwork, first: EdgeId, rng: &mut R) -> Route {
    let mut edges = vec![first];
    let mut len = net.edge(first).length;
    while len < MIN_ROUTE_LEN {
        let last = *edges.last().unwrap();
        let next = random_turn(net, net.edge(last).to, Some(last), rng);
        len += net.edge(next).length;
        edges.push(next);
    }
    Route { edges }
}

/// Draw `count` routes, each starting on a uniformly chosen edge.
pub fn generate_routes<R: Rng + ?Sized>(net: &RoadNetwork, count: usize, rng: &mut R) -> Vec<Route> {
    (0..count)
        .map(|_| {
            let first = rng.random_range(0..net.edges().len());
            route_from(net, first, rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_grid;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_routes() {
        let net = build_grid(5, 5, 100.0, 2).unwrap();
        let a = generate_routes(&net, 40, &mut ChaCha8Rng::seed_from_u64(7));
        let b = generate_routes(&net, 40, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn forty_routes_of_at_least_a_kilometre() {
        let net = build_grid(5, 5, 100.0, 2).unwrap();
        let routes = generate_routes(&net, 40, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(routes.len(), 40);
        for r in &routes {
            assert!(r.length(&net) >= 1000.0);
        }
    }

    proptest! {
        #[test]
        fn routes_are_connected_without_u_turns(seed in any::<u64>()) {
            let net = build_grid(4, 3, 80.0, 2).unwrap();
            let routes = generate_routes(&net, 10, &mut ChaCha8Rng::seed_from_u64(seed));
            for r in routes {
                for w in r.edges.windows(2) {
                    prop_assert_eq!(net.edge(w[0]).to, net.edge(w[1]).from);
                    prop_assert_ne!(net.reverse(w[0]), Some(w[1]));
                }
            }
        }
    }
}
