use super::{collisions_per_hour, mean_pace, run, EngineError, MetricSummary, SimulationResult};
use crate::channel::{ChannelModel, EmulatedChannel, ProfileSelect};
use crate::scenario::{BehaviorMode, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;

/// One series of a sweep: a behaviour mode and, for the warning
/// application, the channel its CAMs travel over.
#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    Careful,
    NoApp,
    Icrw(ChannelModel),
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Careful => "careful".into(),
            Condition::NoApp => "noapp".into(),
            Condition::Icrw(c) => c.label(),
        }
    }

    /// `base` with this condition's mode and channel.
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut c = base.clone();
        match self {
            Condition::Careful => c.behavior_mode = BehaviorMode::Careful,
            Condition::NoApp => c.behavior_mode = BehaviorMode::NoApp,
            Condition::Icrw(ch) => {
                c.behavior_mode = BehaviorMode::Icrw;
                c.channel = ch.clone();
            }
        }
        c
    }
}

/// Parse a sweep series: `careful`, `noapp`, `ideal`, `per:<p>`,
/// `dmax:<m>`, `emu:<bytes>` or `emu:<auto|los|nlos>:<bytes>`. Emulated
/// channels inherit link-budget and curve settings from `base`.
pub fn parse_condition(s: &str, base: &ScenarioConfig) -> Result<Condition, EngineError> {
    let bad = || EngineError::UnknownCondition(s.to_owned());
    let parts: Vec<&str> = s.trim().split(':').collect();
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    let cond = match parts.as_slice() {
        ["careful"] => Condition::Careful,
        ["noapp"] => Condition::NoApp,
        ["ideal"] => Condition::Icrw(ChannelModel::Ideal),
        ["per", p] => Condition::Icrw(ChannelModel::IidLoss { per: num(p)? }),
        ["dmax", d] => Condition::Icrw(ChannelModel::DistanceCutoff { dmax: num(d)? }),
        ["emu", rest @ ..] if !rest.is_empty() && rest.len() <= 2 => {
            let (profile, bytes) = match rest {
                [b] => (ProfileSelect::Auto, *b),
                [p, b] => (
                    match *p {
                        "auto" => ProfileSelect::Auto,
                        "los" => ProfileSelect::Los,
                        "nlos" => ProfileSelect::Nlos,
                        _ => return Err(bad()),
                    },
                    *b,
                ),
                _ => return Err(bad()),
            };
            let mut e = match &base.channel {
                ChannelModel::Emulated(e) => e.clone(),
                _ => EmulatedChannel::new(profile, 100),
            };
            e.profile = profile;
            e.packet_bytes = bytes.parse().map_err(|_| bad())?;
            Condition::Icrw(ChannelModel::Emulated(e))
        }
        _ => return Err(bad()),
    };
    if let Condition::Icrw(ch) = &cond {
        ch.validate()?;
    }
    Ok(cond)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub alarm_thresholds: Vec<f64>,
    pub conditions: Vec<Condition>,
    pub seeds: Vec<u64>,
}

/// Per-run metrics; one row per (threshold, condition, seed).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub alarm_threshold: f64,
    pub condition: String,
    pub seed: u64,
    pub collisions: usize,
    pub collisions_per_hour: f64,
    pub mean_pace_s_per_km: f64,
    pub time_improvement_per_km: f64,
    pub warnings: u64,
    pub alarms: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub alarm_threshold: f64,
    pub condition: String,
    #[serde(flatten)]
    pub summary: MetricSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub runs: Vec<RunMetrics>,
    pub summary: Vec<SummaryRow>,
}

struct Measured {
    collisions: usize,
    collisions_per_hour: f64,
    pace: f64,
    warnings: u64,
    alarms: u64,
    sent: u64,
    delivered: u64,
}

impl From<&SimulationResult> for Measured {
    fn from(r: &SimulationResult) -> Self {
        Self {
            collisions: r.collisions.len(),
            collisions_per_hour: collisions_per_hour(r),
            pace: mean_pace(r),
            warnings: r.warnings,
            alarms: r.alarms,
            sent: r.packets_sent,
            delivered: r.packets_delivered,
        }
    }
}

fn run_all(configs: Vec<ScenarioConfig>, parallel: bool) -> Result<Vec<Measured>, EngineError> {
    let one = |c: &ScenarioConfig| run(c).map(|r| Measured::from(&r));
    if parallel {
        configs.par_iter().map(one).collect()
    } else {
        configs.iter().map(one).collect()
    }
}

/// Run every (ΔT_A, condition, seed) cell with ΔT_w = 2·ΔT_A and summarise
/// over seeds. The careful baseline and the no-application runs do not
/// depend on the thresholds or the channel, so they run once per seed.
/// Parallel and serial execution give identical output.
pub fn sweep(base: &ScenarioConfig, grid: &SweepGrid, parallel: bool) -> Result<SweepOutput, EngineError> {
    if grid.alarm_thresholds.is_empty() {
        return Err(EngineError::EmptyAxis("alarm thresholds"));
    }
    if grid.conditions.is_empty() {
        return Err(EngineError::EmptyAxis("conditions"));
    }
    if grid.seeds.is_empty() {
        return Err(EngineError::EmptyAxis("seeds"));
    }
    let seeded = |cond: &Condition, alarm: Option<f64>, seed: u64| {
        let mut c = cond.apply(base);
        c.rng_seed = seed;
        if let Some(a) = alarm {
            c.alarm_threshold = a;
            c.warning_threshold = 2.0 * a;
        }
        c
    };
    let baseline = run_all(
        grid.seeds.iter().map(|&s| seeded(&Condition::Careful, None, s)).collect(),
        parallel,
    )?;
    let noapp = if grid.conditions.contains(&Condition::NoApp) {
        run_all(
            grid.seeds.iter().map(|&s| seeded(&Condition::NoApp, None, s)).collect(),
            parallel,
        )?
    } else {
        Vec::new()
    };

    let mut cells = Vec::new();
    for &alarm in &grid.alarm_thresholds {
        for cond in &grid.conditions {
            if let Condition::Icrw(_) = cond {
                for &seed in &grid.seeds {
                    cells.push(seeded(cond, Some(alarm), seed));
                }
            }
        }
    }
    let mut icrw = run_all(cells, parallel)?.into_iter();

    let mut runs = Vec::new();
    let mut summary = Vec::new();
    for &alarm in &grid.alarm_thresholds {
        for cond in &grid.conditions {
            let (mut cph, mut imp) = (Vec::new(), Vec::new());
            for (k, &seed) in grid.seeds.iter().enumerate() {
                let owned;
                let m = match cond {
                    Condition::Careful => &baseline[k],
                    Condition::NoApp => &noapp[k],
                    Condition::Icrw(_) => {
                        owned = icrw.next().expect("one result per cell");
                        &owned
                    }
                };
                let improvement = baseline[k].pace - m.pace;
                cph.push(m.collisions_per_hour);
                imp.push(improvement);
                runs.push(RunMetrics {
                    alarm_threshold: alarm,
                    condition: cond.label(),
                    seed,
                    collisions: m.collisions,
                    collisions_per_hour: m.collisions_per_hour,
                    mean_pace_s_per_km: m.pace,
                    time_improvement_per_km: improvement,
                    warnings: m.warnings,
                    alarms: m.alarms,
                    packets_sent: m.sent,
                    packets_delivered: m.delivered,
                });
            }
            summary.push(SummaryRow {
                alarm_threshold: alarm,
                condition: cond.label(),
                summary: MetricSummary::from_runs(&cph, &imp),
            });
        }
    }
    Ok(SweepOutput { runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            sim_duration: 300.0,
            vehicle_count: 10,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn condition_labels_round_trip() {
        let base = tiny();
        for s in ["careful", "noapp", "ideal", "per:0.5", "dmax:20", "emu:100", "emu:los:500", "emu:nlos:100"] {
            let c = parse_condition(s, &base).unwrap();
            assert_eq!(c.label(), s);
        }
        assert_eq!(parse_condition("emu:auto:100", &base).unwrap().label(), "emu:100");
        for s in ["", "per", "per:x", "per:1.5", "emu:sky:100", "dmax:-3", "teleport"] {
            assert!(parse_condition(s, &base).is_err(), "{s}");
        }
    }

    #[test]
    fn single_cell_gives_single_row() {
        let grid = SweepGrid {
            alarm_thresholds: vec![1.0],
            conditions: vec![Condition::Icrw(ChannelModel::Ideal)],
            seeds: vec![3],
        };
        let out = sweep(&tiny(), &grid, false).unwrap();
        assert_eq!(out.summary.len(), 1);
        assert_eq!(out.runs.len(), 1);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let grid = SweepGrid {
            alarm_thresholds: vec![],
            conditions: vec![Condition::NoApp],
            seeds: vec![1],
        };
        assert!(matches!(sweep(&tiny(), &grid, false), Err(EngineError::EmptyAxis(_))));
    }

    #[test]
    fn parallel_equals_serial_and_permutes_with_the_grid() {
        let grid = SweepGrid {
            alarm_thresholds: vec![0.5, 1.0],
            conditions: vec![Condition::NoApp, Condition::Icrw(ChannelModel::IidLoss { per: 0.5 })],
            seeds: vec![1, 2],
        };
        let serial = sweep(&tiny(), &grid, false).unwrap();
        let parallel = sweep(&tiny(), &grid, true).unwrap();
        assert_eq!(serial, parallel);

        let flipped = SweepGrid {
            alarm_thresholds: vec![1.0, 0.5],
            ..grid.clone()
        };
        let other = sweep(&tiny(), &flipped, false).unwrap();
        for row in &serial.summary {
            assert!(other.summary.contains(row));
        }
    }
}
