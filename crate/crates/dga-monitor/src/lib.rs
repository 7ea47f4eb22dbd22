//! # dga-monitor
//!
//! An online dissolved-gas-analysis (DGA) monitoring engine for power
//! transformers. It ingests gas-concentration time series, classifies
//! each key gas against three-level concentration and trend limits,
//! grades fault severity from a 4x4 level-by-rate matrix, generates
//! deduplicated event frames with ratio/TDCG diagnostics attached, and
//! dispatches notifications.
//!
//! The library is the primary interface; each major capability has a
//! runnable example:
//!
//! ```text
//! examples/
//! ├── classify_severity.rs   # bands, the severity matrix, validation
//! ├── ratios_tdcg.rs         # the five gas ratios and the TDCG sum
//! ├── trend_estimation.rs    # least-squares rate estimation fallback
//! ├── event_engine.rs        # escalation, dedup and re-arm semantics
//! ├── backfill_pipeline.rs   # file -> analysis -> events -> store
//! ├── notifications.rs       # rendering and sink dispatch
//! └── synthetic_data.rs      # stable and ramp-failure generators
//! ```
//!
//! Run one with:
//!
//! ```bash
//! cargo run -p dga-monitor --example backfill_pipeline
//! ```
//!
//! A thin binary (`dga-monitor`) wraps the same library calls behind the
//! `analyze`, `replay`, `watch`, `gen`, `report` and `check-config`
//! subcommands; see the repository README.
//!
//! ## Quick tour
//!
//! ```rust
//! use dga_monitor::analysis::{analyze, GasHistory, Snapshot};
//! use dga_monitor::model::{default_thresholds, GasSpecies, MeasurementKind, Severity};
//!
//! let cfg = default_thresholds();
//! let at = "2019-01-25T10:14:00Z".parse().unwrap();
//! let mut snapshot = Snapshot::new("TX-1C", at);
//! snapshot.record(GasSpecies::H2, MeasurementKind::Concentration, 334.0, at);
//! snapshot.record(GasSpecies::H2, MeasurementKind::Trend, 228.0, at);
//!
//! let result = analyze(&snapshot, &GasHistory::new(), &cfg).unwrap();
//! let h2 = result.assessment(GasSpecies::H2).unwrap();
//! assert_eq!(h2.severity, Severity::Warning);
//! ```

pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod ingest;
pub mod model;
pub mod notify;
pub mod report;
pub mod store;
pub mod synth;

pub use analysis::{analyze, AnalysisResult, GasAssessment, RatioReport, Snapshot, TdcgResult};
pub use config::AppConfig;
pub use engine::{Engine, EngineConfig, EventFrame};
pub use ingest::{backfill, follow, replay, InputFormat, RunContext, RunReport, Speed};
pub use model::{
    default_thresholds, parse_species, validate_config, Band, GasSpecies, MeasurementKind, Sample,
    Severity, ThresholdConfig,
};
pub use notify::{dispatch, render, Notifier, NotificationPayload, Sink, Template};
pub use store::{EventFilter, EventStore};
pub use synth::SynthProfile;
