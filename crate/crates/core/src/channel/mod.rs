//! Packet delivery between vehicles: pathloss, tapped-delay-line fading, an
//! SNR-to-PER link curve, and the two reference channels.
//!
//! The emulated channel collapses the frequency-selective tapped delay line
//! into one instantaneous aggregate power gain (tap delays are carried for
//! documentation only) and feeds
//!
//! ```text
//! snr = P_tx − PL(d) − L_extra − L_corner + G(t) − N_floor
//! ```
//!
//! into [`packet_error_probability`]. `L_corner` applies to NLOS links only. Interference and MAC contention are not
//! modelled.

pub mod fading;
pub mod link;
pub mod los;
pub mod pathloss;
pub mod per;
pub mod validate;

use crate::geometry::Point;
use crate::mobility::VehicleId;
use crate::rng;
use crate::scenario::RoadNetwork;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub use fading::{synthesize_tap, TapGenerator, TapKind, TapProfile, TapSpec, DEFAULT_SINUSOIDS};
pub use link::{FadingLink, PairKey};
pub use los::{classify_los, LinkClass};
pub use pathloss::pathloss_db;
pub use per::{packet_error_probability, PerCurve};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    InvalidDistance(f64),
    #[error("half-bathtub tap needs a non-zero Doppler shift, got {0} Hz")]
    InvalidDoppler(f64),
    #[error("invalid tap profile: {0}")]
    InvalidProfile(String),
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
}

/// Which tap profile an emulated link uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSelect {
    /// LOS or NLOS from the geometry of each link.
    Auto,
    Los,
    Nlos,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    /// Lumped losses not covered by the pathloss law (antennas, cabling,
    /// vehicle body).
    pub extra_loss_db: f64,
    /// Corner diffraction loss added on NLOS links.
    pub nlos_loss_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            noise_floor_dbm: -98.0,
            extra_loss_db: 10.0,
            nlos_loss_db: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmulatedChannel {
    pub profile: ProfileSelect,
    pub packet_bytes: u32,
    pub budget: LinkBudget,
    pub curve: PerCurve,
    pub sinusoids: usize,
}

impl EmulatedChannel {
    pub fn new(profile: ProfileSelect, packet_bytes: u32) -> Self {
        Self {
            profile,
            packet_bytes,
            budget: LinkBudget::default(),
            curve: PerCurve::default(),
            sinusoids: DEFAULT_SINUSOIDS,
        }
    }

    /// Mean SNR before fading at distance `d`.
    pub fn mean_snr_db(&self, d: f64, class: LinkClass) -> Result<f64, ChannelError> {
        let corner = if class == LinkClass::Nlos { self.budget.nlos_loss_db } else { 0.0 };
        Ok(self.budget.tx_power_dbm - pathloss_db(d)? - self.budget.extra_loss_db - corner - self.budget.noise_floor_dbm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChannelModel {
    /// Every packet arrives.
    Ideal,
    /// Each packet is lost independently with probability `per`.
    IidLoss { per: f64 },
    /// Packets arrive iff the endpoints are at most `dmax` metres apart.
    DistanceCutoff { dmax: f64 },
    Emulated(EmulatedChannel),
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match self {
            ChannelModel::Ideal => Ok(()),
            ChannelModel::IidLoss { per } if (0.0..=1.0).contains(per) => Ok(()),
            ChannelModel::IidLoss { per } => Err(ChannelError::InvalidParameter(format!(
                "per must lie in [0, 1], got {per}"
            ))),
            ChannelModel::DistanceCutoff { dmax } if *dmax > 0.0 => Ok(()),
            ChannelModel::DistanceCutoff { dmax } => Err(ChannelError::InvalidParameter(format!(
                "dmax must be positive, got {dmax}"
            ))),
            ChannelModel::Emulated(e) => {
                if e.packet_bytes == 0 {
                    return Err(ChannelError::InvalidParameter("packet length must be positive".into()));
                }
                if e.sinusoids == 0 {
                    return Err(ChannelError::InvalidParameter("sinusoids must be positive".into()));
                }
                if !(e.curve.slope > 0.0) {
                    return Err(ChannelError::InvalidParameter("per_slope must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Short label, also accepted by sweep axis parsing.
    pub fn label(&self) -> String {
        match self {
            ChannelModel::Ideal => "ideal".into(),
            ChannelModel::IidLoss { per } => format!("per:{per}"),
            ChannelModel::DistanceCutoff { dmax } => format!("dmax:{dmax}"),
            ChannelModel::Emulated(e) => match e.profile {
                ProfileSelect::Auto => format!("emu:{}", e.packet_bytes),
                ProfileSelect::Los => format!("emu:los:{}", e.packet_bytes),
                ProfileSelect::Nlos => format!("emu:nlos:{}", e.packet_bytes),
            },
        }
    }
}

/// One transmitter or receiver as seen by the channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Endpoint {
    pub id: VehicleId,
    pub pos: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adjudication {
    pub delivered: bool,
    pub distance: f64,
    /// Only computed for the emulated channel, and only when requested or
    /// needed to settle the outcome.
    pub snr_db: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
struct LinkSlot {
    class: LinkClass,
    generation: u64,
}

/// Lazily instantiated fading links, one per unordered vehicle pair. A link
/// is re-drawn whenever its LOS/NLOS class changes.
#[derive(Debug)]
pub struct LinkStore {
    seed: u64,
    dt: f64,
    los: TapProfile,
    nlos: TapProfile,
    slots: HashMap<PairKey, LinkSlot>,
    links: HashMap<PairKey, FadingLink>,
}

impl LinkStore {
    /// `dt` is the lattice on which links are usually sampled; any other
    /// instant is evaluated directly.
    pub fn new(seed: u64, dt: f64) -> Self {
        Self {
            seed,
            dt,
            los: TapProfile::urban_los(),
            nlos: TapProfile::urban_nlos(),
            slots: HashMap::new(),
            links: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Drop every link that involves `id`.
    pub fn forget(&mut self, id: VehicleId) {
        self.links.retain(|k, _| k.0 != id && k.1 != id);
        self.slots.retain(|k, _| k.0 != id && k.1 != id);
    }

    fn profile(&self, class: LinkClass) -> &TapProfile {
        match class {
            LinkClass::Los => &self.los,
            LinkClass::Nlos => &self.nlos,
        }
    }

    /// Record the current class of a pair, bumping its generation on a flip.
    fn observe(&mut self, key: PairKey, class: LinkClass) {
        match self.slots.get_mut(&key) {
            Some(slot) if slot.class == class => {}
            Some(slot) => {
                slot.class = class;
                slot.generation += 1;
                self.links.remove(&key);
            }
            None => {
                self.slots.insert(key, LinkSlot { class, generation: 0 });
            }
        }
    }

    fn link_mut(&mut self, key: PairKey, sinusoids: usize, t: f64) -> Result<&mut FadingLink, ChannelError> {
        if !self.links.contains_key(&key) {
            let slot = self.slots[&key];
            let mut r = rng::stream(self.seed, "fading", &[key.0 .0, key.1 .0, slot.generation]);
            let link = FadingLink::new(key, slot.class, self.profile(slot.class), sinusoids, t, &mut r)?;
            self.links.insert(key, link);
        }
        Ok(self.links.get_mut(&key).unwrap())
    }

    fn gain_linear(&mut self, key: PairKey, sinusoids: usize, t: f64) -> Result<f64, ChannelError> {
        let dt = self.dt;
        let link = self.link_mut(key, sinusoids, t)?;
        let step = (t / dt).round();
        if step >= 0.0 && (step * dt - t).abs() < 1e-9 {
            Ok(link.gain_linear_at_step(step as u64, dt))
        } else {
            Ok(link.gain_linear(t))
        }
    }

    fn static_floor(&self, class: LinkClass) -> f64 {
        let p = self.profile(class);
        p.taps
            .iter()
            .zip(p.power_weights())
            .filter(|(t, _)| t.kind == TapKind::Static)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Decide whether one packet from `tx` reaches `rx` at time `t`.
///
/// `want_snr` forces the fading gain to be evaluated even when the outcome is
/// already settled by the static-tap lower bound on the gain.
#[allow(clippy::too_many_arguments)]
pub fn adjudicate<R: Rng + ?Sized>(
    model: &ChannelModel,
    tx: &Endpoint,
    rx: &Endpoint,
    t: f64,
    net: &RoadNetwork,
    store: &mut LinkStore,
    rng: &mut R,
    want_snr: bool,
) -> Result<Adjudication, ChannelError> {
    let distance = tx.pos.distance(rx.pos);
    let (delivered, snr_db) = match model {
        ChannelModel::Ideal => (true, None),
        ChannelModel::IidLoss { per } => (rng.random::<f64>() >= *per, None),
        ChannelModel::DistanceCutoff { dmax } => (distance <= *dmax, None),
        ChannelModel::Emulated(emu) => {
            let class = match emu.profile {
                ProfileSelect::Auto => classify_los(tx.pos, rx.pos, net),
                ProfileSelect::Los => LinkClass::Los,
                ProfileSelect::Nlos => LinkClass::Nlos,
            };
            let key = PairKey::new(tx.id, rx.id);
            store.observe(key, class);
            let mean_snr = emu.mean_snr_db(distance.max(1e-3), class)?;
            let u: f64 = rng.random();
            let floor = store.static_floor(class);
            let worst = packet_error_probability(mean_snr + 10.0 * floor.log10(), emu.packet_bytes, &emu.curve);
            if u >= worst && !want_snr {
                (true, None)
            } else {
                let g = store.gain_linear(key, emu.sinusoids, t)?;
                let snr = mean_snr + 10.0 * g.log10();
                (u >= packet_error_probability(snr, emu.packet_bytes, &emu.curve), Some(snr))
            }
        }
    };
    Ok(Adjudication {
        delivered,
        distance,
        snr_db,
    })
}
