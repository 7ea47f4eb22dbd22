//! Rendering an event frame into the sectioned notification layout and
//! dispatching it to a sink.
//!
//! ```bash
//! cargo run -p dga-monitor --example notifications
//! ```

use chrono::{DateTime, Utc};
use dga_monitor::analysis::{analyze, GasHistory, Snapshot};
use dga_monitor::engine::build_frame;
use dga_monitor::model::{default_thresholds, GasSpecies, MeasurementKind};
use dga_monitor::notify::{dispatch, render, RetryPolicy, Sink, Template};

fn main() {
    let at: DateTime<Utc> = "2019-01-25T10:14:00Z".parse().unwrap();
    let mut snapshot = Snapshot::new("TX-1C", at);
    for (gas, kind, value) in [
        (GasSpecies::H2, MeasurementKind::Concentration, 334.0),
        (GasSpecies::H2, MeasurementKind::Trend, 228.0),
        (GasSpecies::C2H4, MeasurementKind::Concentration, 68.0),
        (GasSpecies::C2H2, MeasurementKind::Concentration, 1.96),
        (GasSpecies::CH4, MeasurementKind::Concentration, 40.0),
        (GasSpecies::C2H6, MeasurementKind::Concentration, 30.0),
        (GasSpecies::CO, MeasurementKind::Concentration, 300.0),
    ] {
        snapshot.record(gas, kind, value, at);
    }
    let result = analyze(&snapshot, &GasHistory::new(), &default_thresholds()).unwrap();
    let frame = build_frame(&result, GasSpecies::H2).unwrap();

    let template = Template {
        report_url: Some("https://dashboards.example/tx-1c".into()),
        ..Template::default()
    };
    let payload = render(&frame, &template).unwrap();

    // The same payload goes to any sink; stdout here. Webhook sinks POST
    // the structured frame plus the rendered text as JSON, retrying on
    // failure per the policy (1 s, 2 s, 4 s by default).
    let record = dispatch(&payload, &Sink::Stdout, &RetryPolicy::default());
    eprintln!(
        "delivery to {}: {:?} after {} attempt(s)",
        record.destination, record.outcome, record.attempts
    );
}
