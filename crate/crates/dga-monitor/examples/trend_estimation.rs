//! Trend handling: a fresh device-reported trend channel wins; without
//! one, the rate is estimated by least squares over the history window.
//!
//! ```bash
//! cargo run -p dga-monitor --example trend_estimation
//! ```

use chrono::{DateTime, Duration, Utc};
use dga_monitor::analysis::{analyze, estimate_rate, GasHistory, Snapshot};
use dga_monitor::model::{default_thresholds, GasSpecies, MeasurementKind};

fn main() {
    let at: DateTime<Utc> = "2019-01-25T00:00:00Z".parse().unwrap();

    // Irregular sampling does not bias the estimator: an exact 12 ppm/day
    // ramp comes back exactly.
    let series: Vec<(DateTime<Utc>, f64)> = [(0i64, 88.0), (300, 90.5), (1020, 96.5), (1440, 100.0)]
        .iter()
        .map(|(mins, v)| (at - Duration::minutes(1440 - mins), *v))
        .collect();
    let rate = estimate_rate(&series, Duration::hours(24), at).unwrap();
    println!("estimated rate: {rate} ppm/day");

    // analyze() prefers the reported trend channel when present...
    let cfg = default_thresholds();
    let mut snapshot = Snapshot::new("TX-1C", at);
    snapshot.record(GasSpecies::H2, MeasurementKind::Concentration, 100.0, at);
    snapshot.record(GasSpecies::H2, MeasurementKind::Trend, 31.0, at);
    let mut history = GasHistory::new();
    for (t, v) in &series {
        history.push(GasSpecies::H2, *t, *v);
    }
    let result = analyze(&snapshot, &history, &cfg).unwrap();
    let h2 = result.assessment(GasSpecies::H2).unwrap();
    println!(
        "with reported channel: trend {:?} -> band {}, severity {}",
        h2.trend, h2.trend_band, h2.severity
    );

    // ...and falls back to the estimate when the channel is absent.
    let mut bare = Snapshot::new("TX-1C", at);
    bare.record(GasSpecies::H2, MeasurementKind::Concentration, 100.0, at);
    let result = analyze(&bare, &history, &cfg).unwrap();
    let h2 = result.assessment(GasSpecies::H2).unwrap();
    println!(
        "estimated fallback:    trend {:?} -> band {}, severity {}",
        h2.trend, h2.trend_band, h2.severity
    );
}
