//! The five supplementary gas ratios and the total dissolved combustible
//! gas sum, including how problem channels degrade to "undefined".
//!
//! ```bash
//! cargo run -p dga-monitor --example ratios_tdcg
//! ```

use dga_monitor::analysis::{compute_ratios, compute_tdcg, Snapshot};
use dga_monitor::model::{GasSpecies, MeasurementKind};
use dga_monitor::notify::format_value;

fn main() {
    let at = "2019-06-28T16:43:10Z".parse().unwrap();
    let mut snapshot = Snapshot::new("TX-7A", at);
    // Note the negative H2 reading: on-line samplers do emit these. It is
    // kept (flagged suspect at ingestion) and poisons no ratio.
    for (gas, ppm) in [
        (GasSpecies::H2, -48.9),
        (GasSpecies::CH4, 160.0),
        (GasSpecies::C2H6, 120.0),
        (GasSpecies::C2H4, 68.0),
        (GasSpecies::C2H2, 1.96),
        (GasSpecies::CO, 300.0),
    ] {
        snapshot.record(gas, MeasurementKind::Concentration, ppm, at);
    }

    println!("ratios:");
    for (ratio, value) in compute_ratios(&snapshot).iter() {
        let rendered = match value.value() {
            Some(v) => format_value(v),
            None => format!("{value:?}"),
        };
        println!("  {} {}: {rendered}", ratio.label(), ratio.formula());
    }

    match compute_tdcg(&snapshot) {
        dga_monitor::TdcgResult::Available { value } => {
            println!("TDCG: {} ppm", format_value(value))
        }
        dga_monitor::TdcgResult::Unavailable { unavailable } => {
            println!("TDCG unavailable, missing {unavailable:?}")
        }
    }

    // Drop CO and the TDCG degrades to an explicit missing list.
    let mut partial = Snapshot::new("TX-7A", at);
    for gas in [GasSpecies::H2, GasSpecies::CH4] {
        partial.record(gas, MeasurementKind::Concentration, 10.0, at);
    }
    println!("partial snapshot -> {:?}", compute_tdcg(&partial));
}
