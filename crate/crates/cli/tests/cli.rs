use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn icrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icrw")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_config(dir: &Path, body: &str) -> String {
    let p = dir.join("small.cfg");
    fs::write(&p, format!("# short run\nvehicle_count = 12\nsim_duration = 60\n{body}")).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&icrw(&["--help"])), 0);
    assert_eq!(code(&icrw(&["--version"])), 0);
    assert_eq!(code(&icrw(&["run", "--help"])), 0);
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(code(&icrw(&["run", "--bogus"])), 1);
    assert_eq!(code(&icrw(&[])), 1);
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "log.packets = true\n");
    let out = dir.path().join("out");
    let o = icrw(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["result.csv", "packets.csv", "events.jsonl", "config.cfg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("collisions/hour"));
    assert!(!fs::read_to_string(out.join("result.csv")).unwrap().contains("# generated"));
    let echoed = fs::read_to_string(out.join("config.cfg")).unwrap();
    assert!(echoed.contains("vehicle_count = 12"));
}

#[test]
fn runs_are_reproducible_and_set_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "rng_seed = 3\n");
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = icrw(&[
            "run",
            "--config",
            &cfg,
            "--set",
            "behavior_mode=noapp",
            "--out",
            out.to_str().unwrap(),
            "--no-timestamp",
        ]);
        assert_eq!(code(&o), 0);
        (fs::read(out.join("result.csv")).unwrap(), fs::read_to_string(out.join("config.cfg")).unwrap())
    };
    let (a, echo) = go("a");
    let (b, _) = go("b");
    assert_eq!(a, b);
    assert!(echo.contains("behavior_mode = noapp"));
}

#[test]
fn timestamp_is_written_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");
    assert_eq!(code(&icrw(&["run", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    assert!(fs::read_to_string(out.join("result.csv")).unwrap().starts_with("# generated"));
}

#[test]
fn missing_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = icrw(&["run", "--config", "/nonexistent/x.cfg", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn bad_key_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "speed = 3\n");
    let out = dir.path().join("out");
    let o = icrw(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn sweep_writes_tables_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("sw");
    let o = icrw(&[
        "sweep",
        "--config",
        &cfg,
        "--conditions",
        "noapp,ideal,per:0.5",
        "--alarm",
        "0.5,1.5",
        "--seeds",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--no-timestamp",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 2 * 2);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2);
    for stem in ["collisions", "time_improvement"] {
        let svg = fs::read_to_string(out.join(format!("{stem}.svg"))).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        let csv = fs::read_to_string(out.join(format!("{stem}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6);
    }
}

#[test]
fn sweep_rejects_empty_axes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = icrw(&["sweep", "--conditions", "ideal", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = icrw(&["sweep", "--alarm", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = icrw(&["sweep", "--alarm", "1", "--conditions", "per:2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn validate_channel_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = icrw(&["validate-channel", "--profile", "urban-moon", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    let o = icrw(&["validate-channel", "--profile", "urban-los", "--samples", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(out.join("urban-los-report.txt").exists());

    let o = icrw(&["validate-channel", "--profile", "urban-los", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let spectra = fs::read_to_string(out.join("urban-los-spectra.csv")).unwrap();
    assert!(spectra.starts_with("tap,freq_hz,power_fraction"));
}
