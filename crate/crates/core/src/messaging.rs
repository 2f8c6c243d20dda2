//! Periodic CAM generation, broadcast delivery over the channel and
//! neighbour-table upkeep.

use crate::channel::{adjudicate, ChannelError, ChannelModel, Endpoint, LinkStore};
use crate::geometry::Point;
use crate::icrw::{NeighborRecord, NeighborTable};
use crate::mobility::{VehicleId, VehicleState};
use crate::rng;
use crate::scenario::RoadNetwork;
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cam {
    pub sender: VehicleId,
    pub timestamp: f64,
    pub pos: Point,
    pub speed: f64,
    pub heading: f64,
    pub bytes: u32,
}

impl Cam {
    pub fn record(&self) -> NeighborRecord {
        NeighborRecord {
            id: self.sender,
            pos: self.pos,
            speed: self.speed,
            heading: self.heading,
            timestamp: self.timestamp,
        }
    }
}

/// One row of the packet log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PacketRecord {
    pub time: f64,
    pub tx: VehicleId,
    pub rx: VehicleId,
    pub distance: f64,
    pub snr_db: Option<f64>,
    pub delivered: bool,
}

/// Transmission offset of a vehicle within the CAM period, in steps, drawn
/// uniformly and independently per vehicle.
pub fn cam_phase(seed: u64, id: VehicleId, period_steps: u64) -> u64 {
    rng::stream(seed, "cam-phase", &[id.0]).random_range(0..period_steps.max(1))
}

/// CAMs generated at simulation step `step` (time `step · dt`).
pub fn due_cams(
    states: &[VehicleState],
    net: &RoadNetwork,
    step: u64,
    dt: f64,
    period_steps: u64,
    bytes: u32,
) -> Vec<Cam> {
    let period = period_steps.max(1);
    states
        .iter()
        .filter(|s| (step + period - s.cam_phase % period) % period == 0)
        .map(|s| Cam {
            sender: s.id,
            timestamp: step as f64 * dt,
            pos: s.position(net),
            speed: s.speed,
            heading: s.heading(net),
            bytes,
        })
        .collect()
}

/// Adjudicate one CAM independently at every receiver other than the
/// sender. Every receiver appears in the returned map.
#[allow(clippy::too_many_arguments)]
pub fn deliver<R: Rng + ?Sized>(
    cam: &Cam,
    receivers: &[Endpoint],
    model: &ChannelModel,
    net: &RoadNetwork,
    store: &mut LinkStore,
    rng: &mut R,
    mut log: Option<&mut Vec<PacketRecord>>,
) -> Result<BTreeMap<VehicleId, bool>, ChannelError> {
    let tx = Endpoint {
        id: cam.sender,
        pos: cam.pos,
    };
    let mut out = BTreeMap::new();
    for rx in receivers.iter().filter(|r| r.id != cam.sender) {
        let a = adjudicate(model, &tx, rx, cam.timestamp, net, store, rng, log.is_some())?;
        if let Some(log) = log.as_deref_mut() {
            log.push(PacketRecord {
                time: cam.timestamp,
                tx: cam.sender,
                rx: rx.id,
                distance: a.distance,
                snr_db: a.snr_db,
                delivered: a.delivered,
            });
        }
        out.insert(rx.id, a.delivered);
    }
    Ok(out)
}

/// Store a delivered CAM; lost ones leave the table untouched.
pub fn ingest(cam: &Cam, delivered: bool, table: &mut NeighborTable) {
    if delivered {
        table.upsert(cam.record());
    }
}
