//! Experiment configuration and its `key = value` file format.
//!
//! One setting per line, `#` starts a comment. Keys are the field names of
//! [`ScenarioConfig`] plus dotted groups for the network (`grid.*` or
//! explicit `node`/`edge`/`building` lines), the channel (`channel.*`), the
//! drivers (`driver.*`) and logging (`log.*`). Unknown keys are errors.
//!
//! ```text
//! vehicle_count = 40
//! behavior_mode = icrw
//! alarm_threshold = 1.0
//! warning_threshold = 2.0
//! channel.kind = emu
//! channel.packet_bytes = 100
//! ```

use super::grid::GridSpec;
use super::network::{EdgeSpec, Node, PriorityRule, RoadClass, RoadNetwork, DEFAULT_SPEED_LIMIT};
use super::ScenarioError;
use crate::channel::{ChannelModel, EmulatedChannel, ProfileSelect};
use crate::geometry::{Point, Rect};
use crate::icrw::{BrakeTimeModel, IcrwParams};
use crate::mobility::DriverParams;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorMode {
    /// Every driver respects the right of way.
    Careful,
    /// Every driver ignores it and no warnings are given.
    NoApp,
    /// Drivers are distracted unless the warning application makes them
    /// careful.
    Icrw,
}

impl BehaviorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorMode::Careful => "careful",
            BehaviorMode::NoApp => "noapp",
            BehaviorMode::Icrw => "icrw",
        }
    }
}

impl FromStr for BehaviorMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "careful" => Ok(BehaviorMode::Careful),
            "noapp" => Ok(BehaviorMode::NoApp),
            "icrw" => Ok(BehaviorMode::Icrw),
            _ => Err(format!("unknown behavior mode `{s}` (careful, noapp, icrw)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NetworkSpec {
    Grid(GridSpec),
    Explicit {
        nodes: Vec<Node>,
        edges: Vec<EdgeSpec>,
        buildings: Vec<Rect>,
        box_side: f64,
    },
}

impl NetworkSpec {
    pub fn build(&self) -> Result<RoadNetwork, ScenarioError> {
        match self {
            NetworkSpec::Grid(g) => g.build(),
            NetworkSpec::Explicit {
                nodes,
                edges,
                buildings,
                box_side,
            } => RoadNetwork::new(nodes.clone(), edges.clone(), *box_side, buildings.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub vehicle_count: usize,
    pub sim_duration: f64,
    pub max_speed: f64,
    pub alarm_threshold: f64,
    pub warning_threshold: f64,
    pub deceleration: f64,
    pub reaction_time: f64,
    pub cam_period: f64,
    pub time_step: f64,
    pub channel: ChannelModel,
    pub behavior_mode: BehaviorMode,
    pub rng_seed: u64,
    pub brake_time: BrakeTimeModel,
    pub neighbor_ttl: f64,
    /// Leave trips cut short by a crash out of travel-time averages.
    pub exclude_crashed_trips: bool,
    pub network: NetworkSpec,
    pub driver: DriverParams,
    /// Keep a per-packet delivery log.
    pub log_packets: bool,
    /// Adjudicate a CAM only at receivers whose next intersections it can
    /// matter for.
    pub cam_filter: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let driver = DriverParams::default();
        Self {
            vehicle_count: 40,
            sim_duration: 3600.0,
            max_speed: 50.0 / 3.6,
            alarm_threshold: 1.0,
            warning_threshold: 2.0,
            deceleration: driver.comfortable_brake,
            reaction_time: 1.0,
            cam_period: 0.1,
            time_step: 0.1,
            channel: ChannelModel::Ideal,
            behavior_mode: BehaviorMode::Icrw,
            rng_seed: 1,
            brake_time: BrakeTimeModel::Half,
            neighbor_ttl: 1.1,
            exclude_crashed_trips: true,
            network: NetworkSpec::Grid(GridSpec::default()),
            driver,
            log_packets: false,
            cam_filter: true,
        }
    }
}

/// Channel parameters as they appear in the file, independent of the
/// selected kind.
#[derive(Clone, Debug, PartialEq)]
struct ChannelKeys {
    kind: String,
    per: f64,
    dmax: f64,
    emu: EmulatedChannel,
}

impl ChannelKeys {
    fn from_model(m: &ChannelModel) -> Self {
        let mut k = Self {
            kind: "ideal".into(),
            per: 0.5,
            dmax: 60.0,
            emu: EmulatedChannel::new(ProfileSelect::Auto, 100),
        };
        match m {
            ChannelModel::Ideal => {}
            ChannelModel::IidLoss { per } => {
                k.kind = "per".into();
                k.per = *per;
            }
            ChannelModel::DistanceCutoff { dmax } => {
                k.kind = "dmax".into();
                k.dmax = *dmax;
            }
            ChannelModel::Emulated(e) => {
                k.kind = "emu".into();
                k.emu = e.clone();
            }
        }
        k
    }

    fn model(&self) -> Result<ChannelModel, String> {
        match self.kind.as_str() {
            "ideal" => Ok(ChannelModel::Ideal),
            "per" => Ok(ChannelModel::IidLoss { per: self.per }),
            "dmax" => Ok(ChannelModel::DistanceCutoff { dmax: self.dmax }),
            "emu" => Ok(ChannelModel::Emulated(self.emu.clone())),
            k => Err(format!("unknown channel kind `{k}` (ideal, per, dmax, emu)")),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("`{key}` expects a number, got `{v}`"))
}

fn boolean(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{key}` expects true or false, got `{v}`")),
    }
}

fn fields<const N: usize>(key: &str, v: &str, min: usize) -> Result<Vec<String>, String> {
    let parts: Vec<String> = v.split_whitespace().map(str::to_owned).collect();
    if parts.len() < min || parts.len() > N {
        return Err(format!("`{key}` expects {min} to {N} fields, got {}", parts.len()));
    }
    Ok(parts)
}

/// Accumulates explicit network lines until the network kind is known.
#[derive(Clone, Debug, Default, PartialEq)]
struct ExplicitKeys {
    nodes: Vec<Node>,
    edges: Vec<EdgeSpec>,
    buildings: Vec<Rect>,
}

struct Builder {
    cfg: ScenarioConfig,
    channel: ChannelKeys,
    network: String,
    grid: GridSpec,
    explicit: ExplicitKeys,
    box_side: f64,
}

impl Builder {
    fn new(base: &ScenarioConfig) -> Self {
        let (network, grid, explicit, box_side) = match &base.network {
            NetworkSpec::Grid(g) => ("grid".to_owned(), g.clone(), ExplicitKeys::default(), g.box_side),
            NetworkSpec::Explicit {
                nodes,
                edges,
                buildings,
                box_side,
            } => (
                "explicit".to_owned(),
                GridSpec::default(),
                ExplicitKeys {
                    nodes: nodes.clone(),
                    edges: edges.clone(),
                    buildings: buildings.clone(),
                },
                *box_side,
            ),
        };
        Self {
            channel: ChannelKeys::from_model(&base.channel),
            cfg: base.clone(),
            network,
            grid,
            explicit,
            box_side,
        }
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let c = &mut self.cfg;
        match key {
            "vehicle_count" => c.vehicle_count = num(key, v)?,
            "sim_duration" => c.sim_duration = num(key, v)?,
            "max_speed" => c.max_speed = num(key, v)?,
            "alarm_threshold" => c.alarm_threshold = num(key, v)?,
            "warning_threshold" => c.warning_threshold = num(key, v)?,
            "deceleration" => {
                c.deceleration = num(key, v)?;
                c.driver.comfortable_brake = c.deceleration;
            }
            "reaction_time" => c.reaction_time = num(key, v)?,
            "cam_period" => c.cam_period = num(key, v)?,
            "time_step" => c.time_step = num(key, v)?,
            "behavior_mode" => c.behavior_mode = v.parse()?,
            "rng_seed" => c.rng_seed = num(key, v)?,
            "brake_time" => {
                c.brake_time = match v {
                    "half" => BrakeTimeModel::Half,
                    "full" => BrakeTimeModel::Full,
                    _ => return Err(format!("`brake_time` expects half or full, got `{v}`")),
                }
            }
            "neighbor_ttl" => c.neighbor_ttl = num(key, v)?,
            "exclude_crashed_trips" => c.exclude_crashed_trips = boolean(key, v)?,
            "log.packets" => c.log_packets = boolean(key, v)?,
            "cam_filter" => c.cam_filter = boolean(key, v)?,

            "driver.accel" => c.driver.accel = num(key, v)?,
            "driver.emergency_brake" => c.driver.emergency_brake = num(key, v)?,
            "driver.min_gap" => c.driver.min_gap = num(key, v)?,
            "driver.length" => c.driver.length = num(key, v)?,
            "driver.lookahead" => c.driver.lookahead = num(key, v)?,
            "driver.gap_margin" => c.driver.gap_margin = num(key, v)?,
            "driver.deadlock_wait" => c.driver.deadlock_wait = num(key, v)?,

            "channel.kind" => {
                if !["ideal", "per", "dmax", "emu"].contains(&v) {
                    return Err(format!("unknown channel kind `{v}` (ideal, per, dmax, emu)"));
                }
                self.channel.kind = v.into();
            }
            "channel.per" => self.channel.per = num(key, v)?,
            "channel.dmax" => self.channel.dmax = num(key, v)?,
            "channel.packet_bytes" => self.channel.emu.packet_bytes = num(key, v)?,
            "channel.profile" => {
                self.channel.emu.profile = match v {
                    "auto" => ProfileSelect::Auto,
                    "los" => ProfileSelect::Los,
                    "nlos" => ProfileSelect::Nlos,
                    _ => return Err(format!("`channel.profile` expects auto, los or nlos, got `{v}`")),
                }
            }
            "channel.tx_power_dbm" => self.channel.emu.budget.tx_power_dbm = num(key, v)?,
            "channel.noise_floor_dbm" => self.channel.emu.budget.noise_floor_dbm = num(key, v)?,
            "channel.extra_loss_db" => self.channel.emu.budget.extra_loss_db = num(key, v)?,
            "channel.nlos_loss_db" => self.channel.emu.budget.nlos_loss_db = num(key, v)?,
            "channel.per_slope" => self.channel.emu.curve.slope = num(key, v)?,
            "channel.per_midpoint_100" => self.channel.emu.curve.midpoint_100 = num(key, v)?,
            "channel.per_midpoint_500" => self.channel.emu.curve.midpoint_500 = num(key, v)?,
            "channel.sinusoids" => self.channel.emu.sinusoids = num(key, v)?,

            "network" => {
                if v != "grid" && v != "explicit" {
                    return Err(format!("`network` expects grid or explicit, got `{v}`"));
                }
                self.network = v.into();
            }
            "grid.blocks_x" => self.grid.blocks_x = num(key, v)?,
            "grid.blocks_y" => self.grid.blocks_y = num(key, v)?,
            "grid.block_len" => self.grid.block_len = num(key, v)?,
            "grid.major_period" => self.grid.major_period = num(key, v)?,
            "grid.setback" => self.grid.setback = num(key, v)?,
            "speed_limit" => self.grid.speed_limit = num(key, v)?,
            "box_side" => self.box_side = num(key, v)?,
            "node" => {
                let f = fields::<3>(key, v, 2)?;
                let rule = match f.get(2).map(String::as_str) {
                    None | Some("major_then_right") => PriorityRule::MajorThenRight,
                    Some("right_only") => PriorityRule::RightOnly,
                    Some(o) => return Err(format!("unknown priority rule `{o}` (major_then_right, right_only)")),
                };
                self.explicit.nodes.push(Node {
                    pos: Point::new(num(key, &f[0])?, num(key, &f[1])?),
                    rule,
                });
            }
            "edge" => {
                let f = fields::<4>(key, v, 2)?;
                let class = match f.get(2).map(String::as_str) {
                    None | Some("minor") => RoadClass::Minor,
                    Some("major") => RoadClass::Major,
                    Some(o) => return Err(format!("unknown road class `{o}` (major, minor)")),
                };
                let speed_limit = match f.get(3) {
                    Some(s) => num(key, s)?,
                    None => DEFAULT_SPEED_LIMIT,
                };
                self.explicit.edges.push(EdgeSpec {
                    from: num(key, &f[0])?,
                    to: num(key, &f[1])?,
                    speed_limit,
                    class,
                });
            }
            "building" => {
                let f = fields::<4>(key, v, 4)?;
                self.explicit.buildings.push(Rect::new(
                    Point::new(num(key, &f[0])?, num(key, &f[1])?),
                    Point::new(num(key, &f[2])?, num(key, &f[3])?),
                ));
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<ScenarioConfig, ScenarioError> {
        self.cfg.channel = self.channel.model().map_err(ScenarioError::Invalid)?;
        self.cfg.network = if self.network == "grid" {
            self.grid.box_side = self.box_side;
            NetworkSpec::Grid(self.grid)
        } else {
            NetworkSpec::Explicit {
                nodes: self.explicit.nodes,
                edges: self.explicit.edges,
                buildings: self.explicit.buildings,
                box_side: self.box_side,
            }
        };
        Ok(self.cfg)
    }
}

/// Split `key = value`, dropping comments.
fn split_line(raw: &str) -> Option<Result<(&str, &str), String>> {
    let line = raw.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return None;
    }
    Some(match line.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(format!("expected `key = value`, got `{line}`")),
    })
}

impl ScenarioConfig {
    /// Parse a configuration file on top of the defaults, then apply
    /// `overrides` (`key=value`). Errors carry the offending line number;
    /// overrides are numbered after the last file line.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ScenarioError> {
        let mut b = Builder::new(&ScenarioConfig::default());
        let mut explicit_seen = false;
        let lines = text.lines().count();
        let numbered = text
            .lines()
            .map(str::to_owned)
            .chain(overrides.iter().cloned())
            .enumerate();
        for (i, raw) in numbered {
            let line = i + 1;
            let Some(kv) = split_line(&raw) else { continue };
            let (k, v) = kv.map_err(|message| ScenarioError::Syntax { line, message })?;
            // Node and edge lines in overrides append; in the file the first
            // one discards any inherited explicit network.
            if i < lines && matches!(k, "node" | "edge" | "building") && !explicit_seen {
                b.explicit = ExplicitKeys::default();
                explicit_seen = true;
            }
            b.set(k, v).map_err(|message| ScenarioError::Syntax { line, message })?;
        }
        let cfg = b.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::parse_with_overrides(text, &[])
    }

    /// Apply `key=value` settings to an existing configuration.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ScenarioError> {
        let mut b = Builder::new(self);
        for (i, raw) in overrides.iter().enumerate() {
            let Some(kv) = split_line(raw) else { continue };
            let (k, v) = kv.map_err(|message| ScenarioError::Syntax { line: i + 1, message })?;
            b.set(k, v)
                .map_err(|message| ScenarioError::Syntax { line: i + 1, message })?;
        }
        let cfg = b.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.alarm_threshold > 0.0 && self.alarm_threshold < self.warning_threshold) {
            return bad(format!(
                "need 0 < alarm_threshold < warning_threshold, got {} and {}",
                self.alarm_threshold, self.warning_threshold
            ));
        }
        if !(self.deceleration > 0.0) {
            return bad(format!("deceleration must be positive, got {}", self.deceleration));
        }
        if !(self.reaction_time >= 0.0) {
            return bad(format!("reaction_time must be non-negative, got {}", self.reaction_time));
        }
        if !(self.time_step > 0.0) {
            return bad(format!("time_step must be positive, got {}", self.time_step));
        }
        if !(self.cam_period >= self.time_step) {
            return bad(format!(
                "cam_period ({}) must be at least time_step ({})",
                self.cam_period, self.time_step
            ));
        }
        let ratio = self.cam_period / self.time_step;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return bad("cam_period must be a whole number of time steps".into());
        }
        if self.vehicle_count < 2 {
            return bad(format!("vehicle_count must be at least 2, got {}", self.vehicle_count));
        }
        if !(self.sim_duration > 0.0) {
            return bad(format!("sim_duration must be positive, got {}", self.sim_duration));
        }
        if !(self.max_speed > 0.0) {
            return bad(format!("max_speed must be positive, got {}", self.max_speed));
        }
        if !(self.neighbor_ttl > 0.0) {
            return bad(format!("neighbor_ttl must be positive, got {}", self.neighbor_ttl));
        }
        let d = &self.driver;
        if !(d.accel > 0.0 && d.emergency_brake >= d.comfortable_brake && d.length > 0.0 && d.min_gap >= 0.0) {
            return bad("driver parameters need accel > 0, emergency_brake >= deceleration, length > 0, min_gap >= 0".into());
        }
        self.channel.validate()?;
        let net = self.network.build()?;
        let capacity: f64 = net
            .edges()
            .iter()
            .map(|e| ((e.length - net.box_side()) / (d.length + d.min_gap)).floor().max(0.0))
            .sum();
        if self.vehicle_count as f64 > capacity / 2.0 {
            return bad(format!(
                "{} vehicles do not fit on this network (at most {})",
                self.vehicle_count,
                (capacity / 2.0) as usize
            ));
        }
        Ok(())
    }

    pub fn icrw_params(&self) -> IcrwParams {
        IcrwParams {
            alarm_threshold: self.alarm_threshold,
            warning_threshold: self.warning_threshold,
            deceleration: self.deceleration,
            reaction_time: self.reaction_time,
            brake_time: self.brake_time,
            neighbor_ttl: self.neighbor_ttl,
            vehicle_length: self.driver.length,
        }
    }

    pub fn driver_params(&self) -> DriverParams {
        DriverParams {
            comfortable_brake: self.deceleration,
            ..self.driver
        }
    }

    /// The full configuration in file syntax; parsing it back gives an equal
    /// configuration.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("vehicle_count", self.vehicle_count.to_string());
        kv("sim_duration", self.sim_duration.to_string());
        kv("max_speed", self.max_speed.to_string());
        kv("alarm_threshold", self.alarm_threshold.to_string());
        kv("warning_threshold", self.warning_threshold.to_string());
        kv("deceleration", self.deceleration.to_string());
        kv("reaction_time", self.reaction_time.to_string());
        kv("cam_period", self.cam_period.to_string());
        kv("time_step", self.time_step.to_string());
        kv("behavior_mode", self.behavior_mode.as_str().into());
        kv("rng_seed", self.rng_seed.to_string());
        kv(
            "brake_time",
            match self.brake_time {
                BrakeTimeModel::Half => "half".into(),
                BrakeTimeModel::Full => "full".into(),
            },
        );
        kv("neighbor_ttl", self.neighbor_ttl.to_string());
        kv("exclude_crashed_trips", self.exclude_crashed_trips.to_string());
        kv("log.packets", self.log_packets.to_string());
        kv("cam_filter", self.cam_filter.to_string());
        let d = &self.driver;
        kv("driver.accel", d.accel.to_string());
        kv("driver.emergency_brake", d.emergency_brake.to_string());
        kv("driver.min_gap", d.min_gap.to_string());
        kv("driver.length", d.length.to_string());
        kv("driver.lookahead", d.lookahead.to_string());
        kv("driver.gap_margin", d.gap_margin.to_string());
        kv("driver.deadlock_wait", d.deadlock_wait.to_string());

        let ch = ChannelKeys::from_model(&self.channel);
        kv("channel.kind", ch.kind.clone());
        kv("channel.per", ch.per.to_string());
        kv("channel.dmax", ch.dmax.to_string());
        kv("channel.packet_bytes", ch.emu.packet_bytes.to_string());
        kv(
            "channel.profile",
            match ch.emu.profile {
                ProfileSelect::Auto => "auto".into(),
                ProfileSelect::Los => "los".into(),
                ProfileSelect::Nlos => "nlos".into(),
            },
        );
        kv("channel.tx_power_dbm", ch.emu.budget.tx_power_dbm.to_string());
        kv("channel.noise_floor_dbm", ch.emu.budget.noise_floor_dbm.to_string());
        kv("channel.extra_loss_db", ch.emu.budget.extra_loss_db.to_string());
        kv("channel.nlos_loss_db", ch.emu.budget.nlos_loss_db.to_string());
        kv("channel.per_slope", ch.emu.curve.slope.to_string());
        kv("channel.per_midpoint_100", ch.emu.curve.midpoint_100.to_string());
        kv("channel.per_midpoint_500", ch.emu.curve.midpoint_500.to_string());
        kv("channel.sinusoids", ch.emu.sinusoids.to_string());

        match &self.network {
            NetworkSpec::Grid(g) => {
                kv("network", "grid".into());
                kv("grid.blocks_x", g.blocks_x.to_string());
                kv("grid.blocks_y", g.blocks_y.to_string());
                kv("grid.block_len", g.block_len.to_string());
                kv("grid.major_period", g.major_period.to_string());
                kv("grid.setback", g.setback.to_string());
                kv("speed_limit", g.speed_limit.to_string());
                kv("box_side", g.box_side.to_string());
            }
            NetworkSpec::Explicit {
                nodes,
                edges,
                buildings,
                box_side,
            } => {
                kv("network", "explicit".into());
                kv("box_side", box_side.to_string());
                for n in nodes {
                    let rule = match n.rule {
                        PriorityRule::MajorThenRight => "major_then_right",
                        PriorityRule::RightOnly => "right_only",
                    };
                    kv("node", format!("{} {} {rule}", n.pos.x, n.pos.y));
                }
                for e in edges {
                    let class = match e.class {
                        RoadClass::Major => "major",
                        RoadClass::Minor => "minor",
                    };
                    kv("edge", format!("{} {} {class} {}", e.from, e.to, e.speed_limit));
                }
                for r in buildings {
                    kv("building", format!("{} {} {} {}", r.min.x, r.min.y, r.max.x, r.max.y));
                }
            }
        }
        s
    }
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec::Grid(GridSpec::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ScenarioConfig::parse("").unwrap(), ScenarioConfig::default());
        assert_eq!(ScenarioConfig::parse("# nothing\n\n").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn keys_and_comments() {
        let text = "vehicle_count = 20  # fewer\nbehavior_mode = careful\nchannel.kind = dmax\nchannel.dmax = 20\n";
        let c = ScenarioConfig::parse(text).unwrap();
        assert_eq!(c.vehicle_count, 20);
        assert_eq!(c.behavior_mode, BehaviorMode::Careful);
        assert_eq!(c.channel, ChannelModel::DistanceCutoff { dmax: 20.0 });
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = ScenarioConfig::parse("vehicle_count = 40\n\nspeed = 3\n").unwrap_err();
        assert_eq!(
            err,
            ScenarioError::Syntax {
                line: 3,
                message: "unknown key `speed`".into()
            }
        );
    }

    #[test]
    fn bad_value_reports_its_line() {
        let err = ScenarioConfig::parse("alarm_threshold = soon\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 1, .. }));
        let err = ScenarioConfig::parse("novalue\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 1, .. }));
    }

    #[test]
    fn overrides_win() {
        let c = ScenarioConfig::parse_with_overrides(
            "channel.kind = per\n",
            &["channel.kind=dmax".into(), "channel.dmax=20".into()],
        )
        .unwrap();
        assert_eq!(c.channel, ChannelModel::DistanceCutoff { dmax: 20.0 });
        assert!(c.to_config_string().contains("channel.dmax = 20\n"));
    }

    #[test]
    fn threshold_order_is_enforced() {
        let err = ScenarioConfig::parse("alarm_threshold = 2\nwarning_threshold = 1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(_)));
    }

    #[test]
    fn cam_period_below_step_is_rejected() {
        assert!(ScenarioConfig::parse("cam_period = 0.05\n").is_err());
    }

    #[test]
    fn explicit_network_parses() {
        let text = "network = explicit\nbox_side = 6\nnode = 0 0\nnode = 100 0\nedge = 0 1 major\nedge = 1 0 major 10\nvehicle_count = 2\n";
        let c = ScenarioConfig::parse(text).unwrap();
        let net = c.network.build().unwrap();
        assert_eq!(net.nodes().len(), 2);
        assert_eq!(net.edge(1).speed_limit, 10.0);
        assert_eq!(ScenarioConfig::parse(&c.to_config_string()).unwrap(), c);
    }

    #[test]
    fn too_many_vehicles_is_rejected() {
        assert!(ScenarioConfig::parse("vehicle_count = 100000\n").is_err());
    }

    proptest! {
        #[test]
        fn echo_round_trips(
            n in 2usize..60, alarm in 0.1f64..3.0, seed in any::<u64>(), kind in 0usize..4,
            per in 0.0f64..1.0, dmax in 1.0f64..200.0, bytes in 1u32..1500,
        ) {
            let mut c = ScenarioConfig {
                vehicle_count: n,
                alarm_threshold: alarm,
                warning_threshold: 2.0 * alarm,
                rng_seed: seed,
                ..ScenarioConfig::default()
            };
            c.channel = match kind {
                0 => ChannelModel::Ideal,
                1 => ChannelModel::IidLoss { per },
                2 => ChannelModel::DistanceCutoff { dmax },
                _ => ChannelModel::Emulated(EmulatedChannel::new(ProfileSelect::Nlos, bytes)),
            };
            let back = ScenarioConfig::parse(&c.to_config_string()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
