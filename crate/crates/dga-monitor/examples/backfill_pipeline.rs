//! The whole pipeline in one pass: generate the failure-case file,
//! backfill it through analysis -> engine -> store, then query the store.
//!
//! ```bash
//! cargo run -p dga-monitor --example backfill_pipeline
//! ```

use chrono::Utc;
use dga_monitor::engine::Engine;
use dga_monitor::ingest::{backfill_path, InputFormat, RunContext};
use dga_monitor::model::default_thresholds;
use dga_monitor::store::{EventFilter, EventStore};
use dga_monitor::synth::{generate, write_csv, SynthProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let csv_path = dir.path().join("table3.csv");
    let store_path = dir.path().join("events.ndjson");

    let cfg = default_thresholds();
    let samples = generate(&SynthProfile::ramp_failure(), 7, &cfg);
    write_csv(&samples, std::fs::File::create(&csv_path)?)?;
    println!("generated {} samples", samples.len());

    let store = EventStore::open(&store_path)?;
    let report = backfill_path(
        &csv_path,
        InputFormat::Csv,
        RunContext {
            thresholds: &cfg,
            staleness: chrono::Duration::hours(48),
            engine: Engine::new(Default::default()),
            store: &store,
            notifier: None, // backfills run with notifications suppressed
        },
    )?;
    println!("{report}");

    // Appends are idempotent by event id: a second backfill of the same
    // file leaves the store unchanged.
    let report2 = backfill_path(
        &csv_path,
        InputFormat::Csv,
        RunContext {
            thresholds: &cfg,
            staleness: chrono::Duration::hours(48),
            engine: Engine::new(Default::default()),
            store: &store,
            notifier: None,
        },
    )?;
    println!("second run emitted {} events, store still holds {}", report2.events(), store.len());

    println!("\nstored events:");
    print!(
        "{}",
        dga_monitor::report::render_table(&store.query(&EventFilter::default())?, Utc::now())
    );
    Ok(())
}
