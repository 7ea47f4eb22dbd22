//! Band classification and severity grading against the fleet default
//! thresholds.
//!
//! ```bash
//! cargo run -p dga-monitor --example classify_severity
//! ```

use dga_monitor::analysis::classify;
use dga_monitor::model::{default_thresholds, validate_config, Band, GasSpecies};

fn main() {
    let cfg = default_thresholds();

    println!("H2 concentration bands:");
    let h2 = cfg.limits_for(GasSpecies::H2).unwrap();
    for value in [2.0, 334.0, 700.0, 1000.0, -48.9] {
        println!(
            "  {value:>7} ppm -> band {}",
            classify(value, &h2.concentration)
        );
    }

    println!("\nH2 trend bands:");
    for value in [0.0, 16.0, 20.0, 31.0, 228.0] {
        println!(
            "  {value:>7} ppm/day -> band {}",
            classify(value, &h2.trend)
        );
    }

    println!("\nseverity matrix lookups (conc band, trend band):");
    for (cb, tb) in [(1, 1), (1, 2), (1, 4), (2, 4), (4, 4)] {
        let severity = cfg
            .matrix
            .lookup(Band::new(cb).unwrap(), Band::new(tb).unwrap());
        println!("  ({cb},{tb}) -> {severity}");
    }

    // validate_config reports every defect, not just the first.
    let mut broken = cfg.clone();
    broken.limits.h2.concentration = [500.0, 400.0, 1000.0];
    println!("\nviolations in a deliberately broken config:");
    for violation in validate_config(&broken) {
        println!("  {violation}");
    }
}
