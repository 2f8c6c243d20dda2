//! Road network, routes and experiment configuration.

pub mod config;
mod grid;
mod network;
mod routes;

pub use config::{BehaviorMode, NetworkSpec, ScenarioConfig};
pub use grid::{build_grid, GridSpec};
pub use network::{
    Edge, EdgeId, EdgeSpec, Node, NodeId, PriorityRule, Turn, RoadClass, RoadNetwork, DEFAULT_BOX_SIDE,
    DEFAULT_SPEED_LIMIT,
};
pub use routes::{generate_routes, random_turn, route_from, Route, MIN_ROUTE_LEN};

use crate::channel::ChannelError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid road network: {0}")]
    Network(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}
