mod svg;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use icrw_core::channel::validate::validate_profile;
use icrw_core::channel::DEFAULT_SINUSOIDS;
use icrw_core::engine::output::{write_events_jsonl, write_packets_csv, write_runs_csv, write_summary_csv, write_trips_csv};
use icrw_core::engine::{
    collisions_per_hour, mean_pace, parse_condition, run, sweep, Condition, SummaryRow, SweepGrid,
};
use icrw_core::{BehaviorMode, MetricSummary, ScenarioConfig, TapProfile};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};
use svg::{line_chart, Series};

const DEFAULT_GRID: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
const TEN_HOURS: f64 = 36_000.0;

#[derive(Parser)]
#[command(name = "icrw", version, about = "Traffic and V2X co-simulation of an intersection collision risk warning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set channel.kind=dmax`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Leave the `# generated` line out of every output file.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one configuration.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep alarm thresholds and channels over several seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Preset series: 3 (reference channels) or 4 (emulated channels).
        #[arg(long, value_parser = ["3", "4"])]
        figure: Option<String>,
        /// Comma-separated series: careful, noapp, ideal, per:<p>,
        /// dmax:<m>, emu:<bytes>, emu:<auto|los|nlos>:<bytes>.
        #[arg(long, value_delimiter = ',')]
        conditions: Vec<String>,
        /// Comma-separated alarm thresholds in seconds.
        #[arg(long, value_delimiter = ',')]
        alarm: Vec<f64>,
        /// Number of seeds; runs use seeds 1..=N.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Ten-hour runs instead of the configured duration.
        #[arg(long)]
        paper_scale: bool,
        /// Run cells one after another.
        #[arg(long)]
        serial: bool,
    },
    /// Check the statistics of a fading profile.
    ValidateChannel {
        /// urban-los or urban-nlos.
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SINUSOIDS)]
        sinusoids: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Failure classes, mapped to exit codes 1, 2 and 3.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Validation(_) => 3,
        }
    }
}

trait OrFailure<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFailure<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run { common } => cmd_run(&common),
        Cmd::Sweep {
            common,
            figure,
            conditions,
            alarm,
            seeds,
            paper_scale,
            serial,
        } => cmd_sweep(&common, figure.as_deref(), &conditions, &alarm, seeds, paper_scale, serial),
        Cmd::ValidateChannel {
            profile,
            samples,
            sinusoids,
            seed,
            out,
        } => cmd_validate(&profile, samples, sinusoids, seed, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Runtime(e) => eprintln!("runtime error: {e:#}"),
                Failure::Validation(msg) => eprintln!("validation failed: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .usage()?,
        None => String::new(),
    };
    let name = common
        .config
        .as_ref()
        .map_or("<defaults>".into(), |p| p.display().to_string());
    ScenarioConfig::parse_with_overrides(&text, &common.set)
        .with_context(|| format!("in {name} (--set lines are numbered after the file)"))
        .usage()
}

fn timestamp(common: &Common) -> Option<String> {
    if common.no_timestamp {
        return None;
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Some(format!("unix {secs}"))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn print_summary(label: &str, s: &MetricSummary) {
    println!(
        "{label}: collisions/hour {:.3} ± {:.3}, time improvement {:.3} ± {:.3} s/km over {} run(s)",
        s.collisions_per_hour, s.collisions_ci95, s.time_improvement_per_km, s.time_improvement_ci95, s.runs
    );
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    print!("{}", cfg.to_config_string());
    let result = run(&cfg).runtime()?;
    let baseline = if cfg.behavior_mode == BehaviorMode::Careful {
        mean_pace(&result)
    } else {
        let careful = ScenarioConfig {
            behavior_mode: BehaviorMode::Careful,
            ..cfg.clone()
        };
        mean_pace(&run(&careful).runtime()?)
    };

    let ts = timestamp(common);
    let ts = ts.as_deref();
    fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create {}", common.out.display()))
        .runtime()?;
    let write = || -> Result<()> {
        let mut f = create(&common.out, "result.csv")?;
        write_trips_csv(&result, &mut f, ts)?;
        f.flush()?;
        let mut f = create(&common.out, "events.jsonl")?;
        write_events_jsonl(&result, &mut f, ts)?;
        f.flush()?;
        if cfg.log_packets {
            let mut f = create(&common.out, "packets.csv")?;
            write_packets_csv(&result, &mut f, ts)?;
            f.flush()?;
        }
        fs::write(common.out.join("config.cfg"), cfg.to_config_string())?;
        Ok(())
    };
    write().runtime()?;

    let summary = MetricSummary::from_runs(&[collisions_per_hour(&result)], &[baseline - mean_pace(&result)]);
    print_summary(cfg.behavior_mode.as_str(), &summary);
    println!(
        "collisions {}, warnings {}, alarms {}, packets {}/{} delivered",
        result.collisions.len(),
        result.warnings,
        result.alarms,
        result.packets_delivered,
        result.packets_sent
    );
    Ok(())
}

fn figure_conditions(figure: &str) -> &'static [&'static str] {
    match figure {
        "3" => &["noapp", "per:0.5", "per:0.8", "dmax:20", "dmax:60", "ideal"],
        _ => &["noapp", "ideal", "emu:100", "emu:500"],
    }
}

fn cmd_sweep(
    common: &Common,
    figure: Option<&str>,
    conditions: &[String],
    alarm: &[f64],
    seeds: u64,
    paper_scale: bool,
    serial: bool,
) -> Result<(), Failure> {
    let mut base = load_config(common)?;
    if paper_scale {
        base.sim_duration = TEN_HOURS;
    }
    let mut names: Vec<String> = figure
        .map(|f| figure_conditions(f).iter().map(|s| s.to_string()).collect())
        .unwrap_or_default();
    names.extend(conditions.iter().filter(|c| !c.trim().is_empty()).cloned());
    if names.is_empty() {
        return Err(Failure::Usage(anyhow::anyhow!("no series: pass --figure or --conditions")));
    }
    let conds: Vec<Condition> = names
        .iter()
        .map(|n| parse_condition(n, &base))
        .collect::<Result<_, _>>()
        .usage()?;
    let thresholds = if alarm.is_empty() && figure.is_some() { DEFAULT_GRID.to_vec() } else { alarm.to_vec() };
    if thresholds.is_empty() {
        return Err(Failure::Usage(anyhow::anyhow!("empty alarm threshold axis: pass --alarm or --figure")));
    }
    if seeds == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--seeds must be at least 1")));
    }
    let grid = SweepGrid {
        alarm_thresholds: thresholds,
        conditions: conds,
        seeds: (1..=seeds).collect(),
    };
    let out = sweep(&base, &grid, !serial).usage()?;

    let ts = timestamp(common);
    let ts = ts.as_deref();
    fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create {}", common.out.display()))
        .runtime()?;
    let write = || -> Result<()> {
        let mut f = create(&common.out, "summary.csv")?;
        write_summary_csv(&out.summary, &mut f, ts)?;
        f.flush()?;
        let mut f = create(&common.out, "runs.csv")?;
        write_runs_csv(&out.runs, &mut f, ts)?;
        f.flush()?;
        fs::write(common.out.join("config.cfg"), base.to_config_string())?;
        let charts: [(&str, &str, fn(&SummaryRow) -> (f64, f64)); 2] = [
            ("collisions", "Collisions per hour", |r| {
                (r.summary.collisions_per_hour, r.summary.collisions_ci95)
            }),
            ("time_improvement", "Time improvement per km [s]", |r| {
                (r.summary.time_improvement_per_km, r.summary.time_improvement_ci95)
            }),
        ];
        for (stem, y_label, pick) in charts {
            let mut f = create(&common.out, &format!("{stem}.csv"))?;
            if let Some(ts) = ts {
                writeln!(f, "# generated {ts}")?;
            }
            writeln!(f, "alarm_threshold,condition,mean,ci95")?;
            let series: Vec<Series> = names
                .iter()
                .map(|n| {
                    let label = grid.conditions[names.iter().position(|m| m == n).unwrap()].label();
                    let points = out
                        .summary
                        .iter()
                        .filter(|r| r.condition == label)
                        .map(|r| {
                            let (m, ci) = pick(r);
                            (r.alarm_threshold, m, ci)
                        })
                        .collect();
                    Series { label, points }
                })
                .collect();
            for s in &series {
                for &(x, m, ci) in &s.points {
                    writeln!(f, "{x},{},{m},{ci}", s.label)?;
                }
            }
            f.flush()?;
            let title = format!("{y_label} vs alarm threshold");
            fs::write(
                common.out.join(format!("{stem}.svg")),
                line_chart(&title, "Alarm threshold ΔT_A [s]", y_label, &series),
            )?;
        }
        Ok(())
    };
    write().runtime()?;

    for r in &out.summary {
        print_summary(&format!("ΔT_A={} {}", r.alarm_threshold, r.condition), &r.summary);
    }
    Ok(())
}

fn cmd_validate(profile: &str, samples: usize, sinusoids: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    let Some(p) = TapProfile::by_name(profile) else {
        return Err(Failure::Usage(anyhow::anyhow!(
            "unknown profile `{profile}`; expected urban-los or urban-nlos"
        )));
    };
    if samples < 2 {
        return Err(Failure::Usage(anyhow::anyhow!("--samples must be at least 2")));
    }
    let v = validate_profile(&p, samples, sinusoids, seed).usage()?;
    let report = v.report();
    print!("{report}");
    let write = || -> Result<()> {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        fs::write(out.join(format!("{profile}-report.txt")), &report)?;
        let mut f = create(out, &format!("{profile}-spectra.csv"))?;
        writeln!(f, "tap,freq_hz,power_fraction")?;
        for s in &v.spectra {
            writeln!(f, "{},{},{}", s.tap, s.freq_hz, s.power_fraction)?;
        }
        f.flush()?;
        Ok(())
    };
    write().runtime()?;
    if v.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{profile}: at least one statistical check failed")))
    }
}
