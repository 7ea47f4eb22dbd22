//! Operator-facing command line: batch analysis, timed replay, live
//! watch, synthetic-case generation, event reporting and config checks.
//!
//! Exit codes are a stable contract across commands: 0 = ran clean with
//! no event at or above caution, 1 = events at or above caution were
//! produced/listed, 2 = usage, parse, config or storage failure.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;

use chrono::{DateTime, SecondsFormat, Utc};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analysis::AnalysisResult;
use crate::config::AppConfig;
use crate::engine::{Engine, EventFrame};
use crate::ingest::{
    self, FollowOptions, InputFormat, RunContext, RunReport, Speed,
};
use crate::model::{GasSpecies, Severity};
use crate::notify::{format_value, Notifier};
use crate::report;
use crate::store::{EventFilter, EventStore};
use crate::synth::{self, SynthProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EVENTS: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "dga-monitor",
    version,
    about = "Online dissolved-gas monitoring for transformers: multi-level threshold analysis, severity grading, event generation and notifications"
)]
pub struct Cli {
    /// TOML configuration file; omitted = built-in fleet defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Append-only event store (NDJSON).
    #[arg(long, global = true, default_value = "events.ndjson")]
    pub store: PathBuf,

    /// Measurement input format.
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    pub format: InputFormat,

    /// Suppress informational output.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a measurement file through the pipeline (notifications off)
    /// and print final statuses plus every generated event.
    Analyze {
        /// Measurement file (CSV or NDJSON per --format).
        input: PathBuf,
        /// Emit the run summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-run a measurement file paced by its own time deltas, with
    /// notifications active.
    Replay {
        input: PathBuf,
        /// Pacing divisor ("3600" plays an hour per second) or "max".
        #[arg(long, default_value = "max", value_parser = parse_speed)]
        speed: Speed,
    },
    /// Consume a live stream ("-" = stdin, else a file that is tailed),
    /// dispatching notifications as events fire.
    Watch {
        /// Source: "-" for stdin or a path to tail.
        #[arg(default_value = "-")]
        source: String,
        /// Heartbeat interval, seconds.
        #[arg(long, default_value_t = 300)]
        heartbeat_secs: u64,
    },
    /// Generate a synthetic measurement file.
    Gen {
        /// "stable" or "ramp-failure".
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Stable-profile span.
        #[arg(long, default_value_t = 24)]
        duration_hours: u64,
        /// Sampling cadence.
        #[arg(long, default_value_t = 15)]
        cadence_mins: u64,
    },
    /// List stored events chronologically.
    Report {
        #[arg(long)]
        transformer: Option<String>,
        #[arg(long)]
        gas: Option<String>,
        /// RFC 3339 lower bound.
        #[arg(long)]
        from: Option<String>,
        /// RFC 3339 upper bound.
        #[arg(long)]
        to: Option<String>,
        /// CSV instead of the text table.
        #[arg(long)]
        csv: bool,
    },
    /// Validate the configuration file and exit.
    CheckConfig,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    s.parse().map_err(|e: ingest::UnknownFormat| e.to_string())
}

fn parse_speed(s: &str) -> Result<Speed, String> {
    s.parse().map_err(|e: ingest::BadSpeed| e.to_string())
}

/// Parses argv and runs; returns the process exit code.
pub fn run() -> i32 {
    dispatch(Cli::parse())
}

pub fn dispatch(cli: Cli) -> i32 {
    let quiet = cli.quiet;
    match cli.command {
        Command::Analyze { ref input, json } => cmd_analyze(&cli, input.clone(), json, quiet),
        Command::Replay { ref input, speed } => cmd_replay(&cli, input.clone(), speed, quiet),
        Command::Watch {
            ref source,
            heartbeat_secs,
        } => cmd_watch(&cli, source.clone(), heartbeat_secs, quiet),
        Command::Gen {
            ref profile,
            seed,
            ref out,
            duration_hours,
            cadence_mins,
        } => cmd_gen(&cli, profile.clone(), seed, out.clone(), duration_hours, cadence_mins, quiet),
        Command::Report {
            ref transformer,
            ref gas,
            ref from,
            ref to,
            csv,
        } => cmd_report(
            &cli,
            transformer.clone(),
            gas.clone(),
            from.clone(),
            to.clone(),
            csv,
        ),
        Command::CheckConfig => cmd_check_config(&cli),
    }
}

fn fail(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    EXIT_FAILURE
}

fn load_config(cli: &Cli) -> Result<AppConfig, i32> {
    let cfg = match &cli.config {
        Some(path) => AppConfig::load(path).map_err(fail)?,
        None => AppConfig::default(),
    };
    let violations = cfg.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("error: config: {v}");
        }
        return Err(EXIT_FAILURE);
    }
    Ok(cfg)
}

fn open_store(cli: &Cli) -> Result<EventStore, i32> {
    EventStore::open(&cli.store).map_err(fail)
}

fn build_notifier(cfg: &AppConfig) -> Result<Notifier, i32> {
    Notifier::new(cfg.sinks(), cfg.template(), cfg.retry_policy()).map_err(fail)
}

fn exit_code_for_events(frames: &[EventFrame]) -> i32 {
    let max = frames.iter().map(|f| f.severity).max();
    if max.is_some_and(|s| s >= Severity::Caution) {
        EXIT_EVENTS
    } else {
        EXIT_OK
    }
}

#[derive(Serialize)]
struct RunJson<'a> {
    source: &'a str,
    accepted: usize,
    rejected: usize,
    evaluations: usize,
    skipped: usize,
    events: &'a [EventFrame],
    finals: &'a BTreeMap<String, AnalysisResult>,
    max_event_severity: Option<Severity>,
    wall_secs: f64,
}

fn print_rejects(report: &RunReport, quiet: bool) {
    if quiet {
        return;
    }
    const MAX_SHOWN: usize = 10;
    for reject in report.rejects.iter().take(MAX_SHOWN) {
        eprintln!("reject: {reject}");
    }
    if report.rejects.len() > MAX_SHOWN {
        eprintln!("reject: ... {} more", report.rejects.len() - MAX_SHOWN);
    }
}

fn print_run(report: &RunReport, quiet: bool) {
    print_rejects(report, quiet);
    if quiet {
        return;
    }
    println!("{report}");
    if report.frames.is_empty() {
        println!("0 events");
    } else {
        println!("{} events:", report.frames.len());
        for frame in &report.frames {
            println!(
                "  {} {} {} bands ({},{}) severity {}",
                frame
                    .triggered_at
                    .to_rfc3339_opts(SecondsFormat::Secs, true),
                frame.transformer_id,
                frame.gas,
                frame.conc_band,
                frame.trend_band,
                frame.severity
            );
        }
    }
    for (tx, result) in &report.finals {
        println!("final status for {tx} at {}:",
            result.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true));
        for a in &result.assessments {
            let trend = match a.trend {
                Some(t) => format!(
                    "{} ppm/day (band {}, {})",
                    format_value(t.value),
                    a.trend_band,
                    match t.source {
                        crate::analysis::TrendSource::Reported => "reported",
                        crate::analysis::TrendSource::Estimated => "estimated",
                    }
                ),
                None => format!("n/a (band {})", a.trend_band),
            };
            println!(
                "  {}: conc {} ppm (band {}), trend {}, severity {}",
                a.species,
                format_value(a.conc_value),
                a.conc_band,
                trend,
                a.severity
            );
        }
        for (ratio, value) in result.ratios.iter() {
            let rendered = match value {
                crate::analysis::RatioValue::Defined { value } => format_value(value),
                crate::analysis::RatioValue::Undefined { undefined } => {
                    format!("n/a ({undefined})")
                }
            };
            println!("  {} {}: {rendered}", ratio.label(), ratio.formula());
        }
        match &result.tdcg {
            crate::analysis::TdcgResult::Available { value } => {
                println!("  TDCG: {} ppm", format_value(*value));
            }
            crate::analysis::TdcgResult::Unavailable { unavailable } => {
                let names: Vec<&str> = unavailable.iter().map(|g| g.name()).collect();
                println!("  TDCG: n/a (missing: {})", names.join(", "));
            }
        }
    }
    if let Some(notify) = &report.notify {
        println!(
            "notifications: {} delivered, {} failed",
            notify.delivered, notify.failed
        );
        for record in notify.records.iter().filter(|r| !r.delivered()) {
            eprintln!(
                "delivery failed: {} to {} after {} attempts",
                record.event_id, record.destination, record.attempts
            );
        }
    }
}

fn cmd_analyze(cli: &Cli, input: PathBuf, json: bool, quiet: bool) -> i32 {
    let cfg = match load_config(cli) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let store = match open_store(cli) {
        Ok(store) => store,
        Err(code) => return code,
    };
    let ctx = RunContext {
        thresholds: &cfg.thresholds,
        staleness: cfg.staleness(),
        engine: Engine::new(cfg.engine_config()),
        store: &store,
        notifier: None,
    };
    let report = match ingest::backfill_path(&input, cli.format, ctx) {
        Ok(report) => report,
        Err(e) => return fail(e),
    };
    if json {
        let doc = RunJson {
            source: &report.source,
            accepted: report.accepted,
            rejected: report.rejected,
            evaluations: report.evaluations,
            skipped: report.skipped,
            events: &report.frames,
            finals: &report.finals,
            max_event_severity: report.max_event_severity(),
            wall_secs: report.wall.as_secs_f64(),
        };
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
    } else {
        print_run(&report, quiet);
    }
    exit_code_for_events(&report.frames)
}

fn cmd_replay(cli: &Cli, input: PathBuf, speed: Speed, quiet: bool) -> i32 {
    let cfg = match load_config(cli) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let store = match open_store(cli) {
        Ok(store) => store,
        Err(code) => return code,
    };
    let notifier = match build_notifier(&cfg) {
        Ok(n) => n,
        Err(code) => return code,
    };
    let path = std::fs::File::open(&input);
    let file = match path {
        Ok(file) => file,
        Err(e) => return fail(format!("{}: {e}", input.display())),
    };
    let ctx = RunContext {
        thresholds: &cfg.thresholds,
        staleness: cfg.staleness(),
        engine: Engine::new(cfg.engine_config()),
        store: &store,
        notifier: Some(notifier),
    };
    let report = match ingest::replay(
        std::io::BufReader::new(file),
        cli.format,
        &input.display().to_string(),
        ctx,
        speed,
    ) {
        Ok(report) => report,
        Err(e) => return fail(e),
    };
    print_run(&report, quiet);
    exit_code_for_events(&report.frames)
}

/// Blocks at end-of-file instead of reporting it, so a growing file can
/// be watched indefinitely.
struct TailReader {
    file: std::fs::File,
}

impl Read for TailReader {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        loop {
            let n = self.file.read(buf)?;
            if n > 0 {
                return Ok(n);
            }
            std::thread::sleep(std::time::Duration::from_millis(200));
        }
    }
}

fn cmd_watch(cli: &Cli, source: String, heartbeat_secs: u64, quiet: bool) -> i32 {
    let cfg = match load_config(cli) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let store = match open_store(cli) {
        Ok(store) => store,
        Err(code) => return code,
    };
    let notifier = match build_notifier(&cfg) {
        Ok(n) => n,
        Err(code) => return code,
    };
    let ctx = RunContext {
        thresholds: &cfg.thresholds,
        staleness: cfg.staleness(),
        engine: Engine::new(cfg.engine_config()),
        store: &store,
        notifier: Some(notifier),
    };
    let options = FollowOptions {
        reorder_tolerance: cfg.reorder_tolerance(),
        heartbeat: (heartbeat_secs > 0)
            .then(|| std::time::Duration::from_secs(heartbeat_secs)),
    };
    let mut heartbeat = |samples: usize| {
        eprintln!("heartbeat: {samples} samples processed");
    };
    let result = if source == "-" {
        ingest::follow(
            std::io::BufReader::new(std::io::stdin()),
            cli.format,
            "stdin",
            ctx,
            options,
            Some(&mut heartbeat),
        )
    } else {
        let file = match std::fs::File::open(&source) {
            Ok(file) => file,
            Err(e) => return fail(format!("{source}: {e}")),
        };
        ingest::follow(
            std::io::BufReader::new(TailReader { file }),
            cli.format,
            &source,
            ctx,
            options,
            Some(&mut heartbeat),
        )
    };
    let report = match result {
        Ok(report) => report,
        Err(e) => return fail(e),
    };
    print_run(&report, quiet);
    exit_code_for_events(&report.frames)
}

fn cmd_gen(
    cli: &Cli,
    profile: String,
    seed: u64,
    out: PathBuf,
    duration_hours: u64,
    cadence_mins: u64,
    quiet: bool,
) -> i32 {
    let cfg = match load_config(cli) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let mut profile = match profile.as_str() {
        "stable" => SynthProfile::stable(chrono::Duration::hours(duration_hours as i64)),
        "ramp-failure" => SynthProfile::ramp_failure(),
        other => {
            return fail(format!(
                "unknown profile {other:?} (expected \"stable\" or \"ramp-failure\")"
            ))
        }
    };
    if cadence_mins == 0 {
        return fail("cadence must be positive");
    }
    profile.cadence = chrono::Duration::minutes(cadence_mins as i64);
    let samples = synth::generate(&profile, seed, &cfg.thresholds);
    let file = match std::fs::File::create(&out) {
        Ok(file) => file,
        Err(e) => return fail(format!("{}: {e}", out.display())),
    };
    if let Err(e) = synth::write_csv(&samples, std::io::BufWriter::new(file)) {
        return fail(format!("{}: {e}", out.display()));
    }
    if !quiet {
        println!("wrote {} samples to {}", samples.len(), out.display());
    }
    EXIT_OK
}

fn cmd_report(
    cli: &Cli,
    transformer: Option<String>,
    gas: Option<String>,
    from: Option<String>,
    to: Option<String>,
    csv: bool,
) -> i32 {
    let store = match open_store(cli) {
        Ok(store) => store,
        Err(code) => return code,
    };
    let gas = match gas {
        None => None,
        Some(token) => match token.parse::<GasSpecies>() {
            Ok(gas) => Some(gas),
            Err(e) => return fail(e),
        },
    };
    let parse_bound = |token: Option<String>| -> Result<Option<DateTime<Utc>>, i32> {
        match token {
            None => Ok(None),
            Some(t) => t
                .parse::<DateTime<Utc>>()
                .map(Some)
                .map_err(|e| fail(format!("bad timestamp {t:?}: {e}"))),
        }
    };
    let from = match parse_bound(from) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let to = match parse_bound(to) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let filter = EventFilter {
        transformer_id: transformer,
        gas,
        from,
        to,
    };
    let frames = match store.query(&filter) {
        Ok(frames) => frames,
        Err(e) => return fail(e),
    };
    let now = Utc::now();
    if csv {
        print!("{}", report::render_csv(&frames, now));
    } else {
        print!("{}", report::render_table(&frames, now));
    }
    exit_code_for_events(&frames)
}

fn cmd_check_config(cli: &Cli) -> i32 {
    let cfg = match &cli.config {
        Some(path) => match AppConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => return fail(e),
        },
        None => {
            println!("no --config given; checking built-in defaults");
            AppConfig::default()
        }
    };
    let violations = cfg.validate();
    if violations.is_empty() {
        println!("config ok");
        EXIT_OK
    } else {
        for v in &violations {
            eprintln!("error: config: {v}");
        }
        EXIT_FAILURE
    }
}
