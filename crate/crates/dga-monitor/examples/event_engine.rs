//! Escalation, deduplication and re-arm semantics of the event engine,
//! replaying the historical failure-case readings by hand.
//!
//! ```bash
//! cargo run -p dga-monitor --example event_engine
//! ```

use chrono::{DateTime, Utc};
use dga_monitor::analysis::{analyze, GasHistory, Snapshot};
use dga_monitor::engine::{Engine, EngineConfig};
use dga_monitor::model::{default_thresholds, GasSpecies, MeasurementKind, ThresholdConfig};

fn h2_reading(cfg: &ThresholdConfig, at: &str, conc: f64, trend: f64) -> dga_monitor::AnalysisResult {
    let at: DateTime<Utc> = at.parse().unwrap();
    let mut snapshot = Snapshot::new("TX-1C", at);
    snapshot.record(GasSpecies::H2, MeasurementKind::Concentration, conc, at);
    snapshot.record(GasSpecies::H2, MeasurementKind::Trend, trend, at);
    analyze(&snapshot, &GasHistory::new(), cfg).unwrap()
}

fn main() {
    let cfg = default_thresholds();
    let mut engine = Engine::new(EngineConfig::default());

    let readings = [
        // The failure-case timeline: typical -> atypical -> warning, then
        // a concentration-band escalation at unchanged severity.
        ("2019-01-24T00:00:00Z", 2.0, 0.0),
        ("2019-01-24T08:02:00Z", 60.0, 16.0),
        ("2019-01-24T10:55:00Z", 85.0, 31.0),
        ("2019-01-25T10:14:00Z", 334.0, 228.0),
        // Same reading again: deduplicated, nothing fires.
        ("2019-01-25T10:29:00Z", 334.0, 228.0),
        // Quiet for >24 h: the gas re-arms...
        ("2019-01-25T11:00:00Z", 2.0, 0.0),
        ("2019-01-26T12:00:00Z", 2.0, 0.0),
        // ...so a fresh escalation notifies again.
        ("2019-01-26T13:00:00Z", 85.0, 31.0),
    ];

    for (at, conc, trend) in readings {
        let result = h2_reading(&cfg, at, conc, trend);
        let events = engine.step(&result).unwrap();
        let fired = if events.is_empty() {
            "-".to_string()
        } else {
            events
                .iter()
                .map(|e| format!("{} ({},{})", e.severity, e.conc_band, e.trend_band))
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!("{at}  conc {conc:>5} trend {trend:>5}  -> {fired}");
    }

    let state = engine.state().gas("TX-1C", GasSpecies::H2).unwrap();
    println!("\nfinal engine state for TX-1C/H2: {state:?}");
}
