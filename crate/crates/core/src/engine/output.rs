//! CSV and JSON-lines writers for run and sweep results.
//!
//! Every writer takes an optional timestamp; when present it is written as a
//! leading `# generated ...` comment line, so files are otherwise
//! byte-identical across reruns.

use super::{EngineError, RunMetrics, SimulationResult, SummaryRow};
use crate::mobility::TripOutcome;
use serde::Serialize;
use std::io::Write;

fn header<W: Write>(w: &mut W, timestamp: Option<&str>) -> Result<(), EngineError> {
    if let Some(ts) = timestamp {
        writeln!(w, "# generated {ts}")?;
    }
    Ok(())
}

fn outcome(o: TripOutcome) -> &'static str {
    match o {
        TripOutcome::Completed => "completed",
        TripOutcome::Crashed => "crashed",
        TripOutcome::InProgress => "in_progress",
    }
}

/// `result.csv`: one row per trip.
pub fn write_trips_csv<W: Write>(result: &SimulationResult, mut w: W, timestamp: Option<&str>) -> Result<(), EngineError> {
    header(&mut w, timestamp)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["vehicle", "start_s", "end_s", "distance_m", "duration_s", "outcome"])?;
    for t in &result.trips {
        c.write_record([
            t.vehicle.to_string(),
            t.start.to_string(),
            t.end.to_string(),
            t.distance.to_string(),
            t.duration.to_string(),
            outcome(t.outcome).to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

/// `packets.csv`: one row per adjudicated (CAM, receiver) pair.
pub fn write_packets_csv<W: Write>(result: &SimulationResult, mut w: W, timestamp: Option<&str>) -> Result<(), EngineError> {
    header(&mut w, timestamp)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["time", "tx", "rx", "distance", "snr_db", "delivered"])?;
    for p in &result.packet_log {
        c.write_record([
            p.time.to_string(),
            p.tx.to_string(),
            p.rx.to_string(),
            p.distance.to_string(),
            p.snr_db.map(|s| s.to_string()).unwrap_or_default(),
            u8::from(p.delivered).to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Event<'a> {
    Collision(&'a crate::mobility::CollisionEvent),
    Risk(&'a super::RiskEvent),
}

impl Event<'_> {
    fn time(&self) -> f64 {
        match self {
            Event::Collision(c) => c.time,
            Event::Risk(r) => r.time,
        }
    }
}

/// `events.jsonl`: collisions and risk onsets in time order.
pub fn write_events_jsonl<W: Write>(result: &SimulationResult, mut w: W, timestamp: Option<&str>) -> Result<(), EngineError> {
    if let Some(ts) = timestamp {
        writeln!(w, "{}", serde_json::json!({ "type": "header", "generated": ts }))?;
    }
    let mut events: Vec<Event> = result
        .collisions
        .iter()
        .map(Event::Collision)
        .chain(result.risk_events.iter().map(Event::Risk))
        .collect();
    events.sort_by(|a, b| a.time().total_cmp(&b.time()));
    for e in &events {
        serde_json::to_writer(&mut w, e).map_err(|e| EngineError::Output(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// `summary.csv`: one row per sweep cell.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W, timestamp: Option<&str>) -> Result<(), EngineError> {
    header(&mut w, timestamp)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record([
        "alarm_threshold",
        "condition",
        "collisions_per_hour",
        "collisions_ci95",
        "time_improvement_per_km",
        "time_improvement_ci95",
        "runs",
    ])?;
    for r in rows {
        let s = &r.summary;
        c.write_record([
            r.alarm_threshold.to_string(),
            r.condition.clone(),
            s.collisions_per_hour.to_string(),
            s.collisions_ci95.to_string(),
            s.time_improvement_per_km.to_string(),
            s.time_improvement_ci95.to_string(),
            s.runs.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

/// `runs.csv`: one row per simulation in a sweep.
pub fn write_runs_csv<W: Write>(rows: &[RunMetrics], mut w: W, timestamp: Option<&str>) -> Result<(), EngineError> {
    header(&mut w, timestamp)?;
    let mut c = csv::Writer::from_writer(w);
    for r in rows {
        c.serialize(r)?;
    }
    c.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn trips_csv_is_stable_and_headed() {
        let cfg = ScenarioConfig {
            sim_duration: 120.0,
            log_packets: true,
            ..ScenarioConfig::default()
        };
        let r = run(&cfg).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trips_csv(&r, &mut a, None).unwrap();
        write_trips_csv(&run(&cfg).unwrap(), &mut b, None).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("vehicle,start_s,end_s,distance_m,duration_s,outcome\n"));
        let mut stamped = Vec::new();
        write_trips_csv(&r, &mut stamped, Some("2026-01-01T00:00:00Z")).unwrap();
        assert!(String::from_utf8(stamped).unwrap().starts_with("# generated 2026-01-01T00:00:00Z\nvehicle"));
        let mut packets = Vec::new();
        write_packets_csv(&r, &mut packets, None).unwrap();
        let lines = String::from_utf8(packets).unwrap().lines().count();
        assert_eq!(lines as u64, r.packets_sent + 1);
    }

    #[test]
    fn events_are_json_lines() {
        let cfg = ScenarioConfig {
            sim_duration: 300.0,
            ..ScenarioConfig::default()
        };
        let r = run(&cfg).unwrap();
        let mut out = Vec::new();
        write_events_jsonl(&r, &mut out, None).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), r.collisions.len() + r.risk_events.len());
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["type"] == "collision" || v["type"] == "risk");
        }
    }
}
