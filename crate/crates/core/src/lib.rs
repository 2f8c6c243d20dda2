//! Deterministic microscopic traffic and V2X co-simulation of an
//! intersection collision risk warning application.
//!
//! Vehicles drive random routes on a grid of unsignalised priority
//! intersections and broadcast periodic CAMs. Receivers keep neighbour
//! tables from the CAMs that survive the channel and classify each approach
//! as IDLE, WARNING or ALARM; warnings make distracted drivers respect the
//! right of way. The channel ranges from ideal through i.i.d. loss and a
//! distance cutoff to a tapped-delay-line fading emulation with an SNR to
//! PER link curve.
//!
//! ```no_run
//! use icrw_core::{engine, ScenarioConfig};
//!
//! let cfg = ScenarioConfig::parse("behavior_mode = icrw\nchannel.kind = emu\n").unwrap();
//! let result = engine::run(&cfg).unwrap();
//! println!("{} collisions/h", engine::collisions_per_hour(&result));
//! ```

pub mod channel;
pub mod engine;
pub mod geometry;
pub mod icrw;
pub mod messaging;
pub mod mobility;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use channel::{ChannelError, ChannelModel, EmulatedChannel, LinkClass, ProfileSelect, TapProfile};
pub use engine::{EngineError, MetricSummary, SimulationResult};
pub use geometry::Point;
pub use icrw::{RiskAssessment, RiskLevel};
pub use mobility::{CollisionEvent, TripOutcome, TripSample, VehicleId, VehicleState};
pub use scenario::{BehaviorMode, RoadNetwork, ScenarioConfig, ScenarioError};
