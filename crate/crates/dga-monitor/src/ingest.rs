//! Measurement ingestion: line parsing (CSV / NDJSON), batch ordering,
//! and the pipeline drivers that feed parsed samples through analysis,
//! the event engine, the store and the notifier.
//!
//! Three modes share one evaluation path: `backfill` (sort the whole
//! file, evaluate sequentially), `replay` (same, paced by the data's own
//! time deltas), and `follow` (tail a stream, reorder-buffer arrivals,
//! evaluate as the watermark advances). Over the same in-order data all
//! three produce identical event stores.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::Instant;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use thiserror::Error;

use crate::analysis::{analyze, AnalysisResult, AnalyzeError, GasHistory, Snapshot};
use crate::engine::{Engine, EngineError, EventFrame};
use crate::model::{
    GasSpecies, MeasurementKind, Sample, SampleError, ThresholdConfig,
};
use crate::notify::{Notifier, NotifySummary};
use crate::store::{EventStore, StoreError};

/// Default reorder buffer span for follow mode.
pub const DEFAULT_REORDER_TOLERANCE_SECS: u64 = 5 * 60;

pub const CSV_HEADER: &str = "timestamp,transformer_id,species,kind,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Ndjson,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown input format: {0:?} (expected \"csv\" or \"ndjson\")")]
pub struct UnknownFormat(pub String);

impl FromStr for InputFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "ndjson" => Ok(InputFormat::Ndjson),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

/// Why one input line was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseReason {
    #[error("expected 5 comma-separated fields, found {0}")]
    BadFieldCount(usize),
    #[error("missing required CSV header {CSV_HEADER:?}")]
    MissingHeader,
    #[error("naive timestamp {0:?}: timestamps must carry a UTC offset")]
    NaiveTimestamp(String),
    #[error("malformed timestamp {0:?}")]
    MalformedTimestamp(String),
    #[error("{0}")]
    UnknownSpecies(#[from] crate::model::UnknownSpecies),
    #[error("{0}")]
    UnknownKind(#[from] crate::model::UnknownKind),
    #[error("malformed value {0:?}")]
    MalformedValue(String),
    #[error("{0}")]
    InvalidSample(#[from] SampleError),
    #[error("malformed JSON object: {0}")]
    MalformedJson(String),
    #[error("arrived {late_secs}s past the reorder tolerance, group already evaluated")]
    LateSample { late_secs: i64 },
    #[error("source ended: {0}")]
    SourceError(String),
}

/// A rejected line: where and why.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: ParseReason,
}

fn parse_timestamp(token: &str) -> Result<DateTime<Utc>, ParseReason> {
    match DateTime::parse_from_rfc3339(token) {
        Ok(dt) => Ok(dt.with_timezone(&Utc)),
        Err(_) => {
            let naive = NaiveDateTime::parse_from_str(token, "%Y-%m-%dT%H:%M:%S")
                .or_else(|_| NaiveDateTime::parse_from_str(token, "%Y-%m-%d %H:%M:%S"));
            if naive.is_ok() {
                Err(ParseReason::NaiveTimestamp(token.to_string()))
            } else {
                Err(ParseReason::MalformedTimestamp(token.to_string()))
            }
        }
    }
}

fn sample_from_fields(
    timestamp: &str,
    transformer_id: &str,
    species: &str,
    kind: &str,
    value: &str,
) -> Result<Sample, ParseReason> {
    let timestamp = parse_timestamp(timestamp)?;
    let species: GasSpecies = species.parse()?;
    let kind: MeasurementKind = kind.parse()?;
    let value: f64 = value
        .parse()
        .map_err(|_| ParseReason::MalformedValue(value.to_string()))?;
    Ok(Sample::new(timestamp, transformer_id, species, kind, value)?)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    timestamp: String,
    transformer_id: String,
    species: String,
    kind: String,
    value: f64,
}

/// Parses one line in the given format into a [`Sample`].
pub fn parse_line(line: &str, format: InputFormat) -> Result<Sample, ParseReason> {
    match format {
        InputFormat::Csv => {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(ParseReason::BadFieldCount(fields.len()));
            }
            sample_from_fields(fields[0], fields[1], fields[2], fields[3], fields[4])
        }
        InputFormat::Ndjson => {
            let raw: RawRecord = serde_json::from_str(line)
                .map_err(|e| ParseReason::MalformedJson(e.to_string()))?;
            let value = raw.value.to_string();
            sample_from_fields(
                &raw.timestamp,
                &raw.transformer_id,
                &raw.species,
                &raw.kind,
                &value,
            )
        }
    }
}

/// A fully parsed input: ordered samples plus the rejects, never
/// silently dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordBatch {
    pub source: String,
    /// Sorted by (timestamp, transformer, species, kind, value).
    pub samples: Vec<Sample>,
    pub rejected: Vec<ParseError>,
}

impl RecordBatch {
    pub fn accepted(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {source_name}: {source}")]
    Io {
        source_name: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("replay speed must be positive, got {0}")]
    BadSpeed(f64),
}

/// Reads and parses a whole source. Every non-blank line is either
/// accepted as exactly one sample or counted as exactly one reject
/// (the CSV header line is neither).
pub fn read_batch<R: BufRead>(
    reader: R,
    format: InputFormat,
    source: &str,
) -> Result<RecordBatch, IngestError> {
    let mut batch = RecordBatch {
        source: source.to_string(),
        ..Default::default()
    };
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            source_name: batch.source.clone(),
            source,
        })?;
        let line_no = idx + 1;
        ingest_line(&mut batch, &mut saw_header, format, line_no, &line);
    }
    batch.samples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(batch)
}

fn ingest_line(
    batch: &mut RecordBatch,
    saw_header: &mut bool,
    format: InputFormat,
    line_no: usize,
    line: &str,
) {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return;
    }
    if format == InputFormat::Csv && !*saw_header {
        *saw_header = true;
        if trimmed.eq_ignore_ascii_case(CSV_HEADER) {
            return;
        }
        batch.rejected.push(ParseError {
            line: line_no,
            reason: ParseReason::MissingHeader,
        });
        return;
    }
    match parse_line(trimmed, format) {
        Ok(sample) => batch.samples.push(sample),
        Err(reason) => batch.rejected.push(ParseError {
            line: line_no,
            reason,
        }),
    }
}

/// Replay pacing: data-time divided by the factor, or as fast as possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Factor(f64),
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid speed {0:?}: expected a positive number or \"max\"")]
pub struct BadSpeed(pub String);

impl FromStr for Speed {
    type Err = BadSpeed;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Speed::Max);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Speed::Factor(v)),
            _ => Err(BadSpeed(s.to_string())),
        }
    }
}

/// Outcome of one pipeline run.
#[derive(Debug, Default)]
pub struct RunReport {
    pub source: String,
    pub accepted: usize,
    pub rejected: usize,
    pub rejects: Vec<ParseError>,
    /// Distinct (transformer, timestamp) instants evaluated.
    pub evaluations: usize,
    /// Instants skipped because no fresh key-gas concentration was known.
    pub skipped: usize,
    /// Frames emitted by the engine during this run, in emission order.
    pub frames: Vec<EventFrame>,
    /// Final analysis per transformer, from the last evaluated instant.
    pub finals: BTreeMap<String, AnalysisResult>,
    pub wall: std::time::Duration,
    pub notify: Option<NotifySummary>,
}

impl RunReport {
    pub fn events(&self) -> usize {
        self.frames.len()
    }

    /// Highest severity among the emitted events.
    pub fn max_event_severity(&self) -> Option<crate::model::Severity> {
        self.frames.iter().map(|f| f.severity).max()
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} samples accepted, {} rejected, {} evaluations, {} events in {:.3}s",
            self.source,
            self.accepted,
            self.rejected,
            self.evaluations,
            self.events(),
            self.wall.as_secs_f64()
        )
    }
}

/// Per-transformer rolling state feeding the analyzer.
#[derive(Default)]
struct TransformerState {
    channels: BTreeMap<(GasSpecies, MeasurementKind), (f64, DateTime<Utc>)>,
    history: GasHistory,
}

/// The shared evaluation path: keeps per-transformer latest values and
/// concentration history, runs analysis per (transformer, timestamp)
/// group, steps the engine, appends frames to the store and hands them
/// to the notifier.
pub struct Pipeline<'a> {
    thresholds: &'a ThresholdConfig,
    staleness: Duration,
    engine: Engine,
    store: &'a EventStore,
    notifier: Option<&'a Notifier>,
    transformers: BTreeMap<String, TransformerState>,
    pub evaluations: usize,
    pub skipped: usize,
    pub frames: Vec<EventFrame>,
    pub finals: BTreeMap<String, AnalysisResult>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        thresholds: &'a ThresholdConfig,
        staleness: Duration,
        engine: Engine,
        store: &'a EventStore,
        notifier: Option<&'a Notifier>,
    ) -> Self {
        Pipeline {
            thresholds,
            staleness,
            engine,
            store,
            notifier,
            transformers: BTreeMap::new(),
            evaluations: 0,
            skipped: 0,
            frames: Vec::new(),
            finals: BTreeMap::new(),
        }
    }

    /// Evaluates one (transformer, timestamp) group of samples.
    pub fn process_group(
        &mut self,
        transformer_id: &str,
        at: DateTime<Utc>,
        samples: &[Sample],
    ) -> Result<(), IngestError> {
        let state = self
            .transformers
            .entry(transformer_id.to_string())
            .or_default();
        for sample in samples {
            let entry = state
                .channels
                .entry((sample.species, sample.kind))
                .or_insert((sample.value, sample.timestamp));
            if sample.timestamp >= entry.1 {
                *entry = (sample.value, sample.timestamp);
            }
            if sample.kind == MeasurementKind::Concentration && sample.species.is_key_gas() {
                state.history.push(sample.species, sample.timestamp, sample.value);
            }
        }
        state.history.prune(at, self.thresholds.trend_window());

        let mut snapshot = Snapshot::new(transformer_id, at).with_staleness(self.staleness);
        for (&(species, kind), &(value, observed_at)) in &state.channels {
            snapshot.record(species, kind, value, observed_at);
        }

        let result = match analyze(&snapshot, &state.history, self.thresholds) {
            Ok(result) => result,
            Err(AnalyzeError::EmptySnapshot(_)) => {
                self.skipped += 1;
                return Ok(());
            }
        };
        self.evaluations += 1;

        let frames = self.engine.step(&result)?;
        self.finals.insert(transformer_id.to_string(), result);
        for frame in frames {
            self.store.append(&frame)?;
            if let Some(notifier) = self.notifier {
                notifier.submit(&frame);
            }
            self.frames.push(frame);
        }
        Ok(())
    }

    /// Runs a sorted batch through the pipeline, optionally pacing
    /// between instants.
    fn run_batch(&mut self, batch: &RecordBatch, speed: Option<Speed>) -> Result<(), IngestError> {
        let mut idx = 0;
        let mut previous_ts: Option<DateTime<Utc>> = None;
        while idx < batch.samples.len() {
            let ts = batch.samples[idx].timestamp;
            let tx = batch.samples[idx].transformer_id.clone();
            let mut end = idx;
            while end < batch.samples.len()
                && batch.samples[end].timestamp == ts
                && batch.samples[end].transformer_id == tx
            {
                end += 1;
            }
            if let Some(Speed::Factor(factor)) = speed {
                if let Some(prev) = previous_ts {
                    if ts > prev {
                        let data_secs = (ts - prev).num_milliseconds() as f64 / 1000.0;
                        std::thread::sleep(std::time::Duration::from_secs_f64(
                            data_secs / factor,
                        ));
                    }
                }
            }
            previous_ts = Some(ts);
            self.process_group(&tx, ts, &batch.samples[idx..end])?;
            idx = end;
        }
        Ok(())
    }

    fn into_report(self, batch: RecordBatch, started: Instant) -> RunReport {
        RunReport {
            source: batch.source,
            accepted: batch.samples.len(),
            rejected: batch.rejected.len(),
            rejects: batch.rejected,
            evaluations: self.evaluations,
            skipped: self.skipped,
            frames: self.frames,
            finals: self.finals,
            wall: started.elapsed(),
            notify: None,
        }
    }
}

/// Everything a pipeline run needs besides its input.
pub struct RunContext<'a> {
    pub thresholds: &'a ThresholdConfig,
    pub staleness: Duration,
    pub engine: Engine,
    pub store: &'a EventStore,
    /// Drained at the end of the run; `None` suppresses notifications.
    pub notifier: Option<Notifier>,
}

fn finish(mut report: RunReport, notifier: Option<Notifier>) -> RunReport {
    report.notify = notifier.map(Notifier::drain);
    report
}

/// Sorts the whole source by timestamp and evaluates every
/// (transformer, timestamp) instant in order. Notifications are the
/// caller's choice; by convention backfills run with `notifier: None`.
pub fn backfill<R: BufRead>(
    reader: R,
    format: InputFormat,
    source: &str,
    ctx: RunContext<'_>,
) -> Result<RunReport, IngestError> {
    run_sorted(reader, format, source, ctx, None)
}

/// Backfill from a file path.
pub fn backfill_path(
    path: impl AsRef<Path>,
    format: InputFormat,
    ctx: RunContext<'_>,
) -> Result<RunReport, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        source_name: path.display().to_string(),
        source,
    })?;
    backfill(
        std::io::BufReader::new(file),
        format,
        &path.display().to_string(),
        ctx,
    )
}

/// Same pipeline as backfill, but paced: wall delays between instants
/// equal the data time deltas divided by the speed factor.
pub fn replay<R: BufRead>(
    reader: R,
    format: InputFormat,
    source: &str,
    ctx: RunContext<'_>,
    speed: Speed,
) -> Result<RunReport, IngestError> {
    if let Speed::Factor(f) = speed {
        if f <= 0.0 || f.is_nan() || !f.is_finite() {
            return Err(IngestError::BadSpeed(f));
        }
    }
    run_sorted(reader, format, source, ctx, Some(speed))
}

fn run_sorted<R: BufRead>(
    reader: R,
    format: InputFormat,
    source: &str,
    ctx: RunContext<'_>,
    speed: Option<Speed>,
) -> Result<RunReport, IngestError> {
    let started = Instant::now();
    let batch = read_batch(reader, format, source)?;
    let RunContext {
        thresholds,
        staleness,
        engine,
        store,
        notifier,
    } = ctx;
    let mut pipeline = Pipeline::new(thresholds, staleness, engine, store, notifier.as_ref());
    pipeline.run_batch(&batch, speed)?;
    let report = pipeline.into_report(batch, started);
    Ok(finish(report, notifier))
}

/// Follow-mode tuning.
pub struct FollowOptions {
    /// Samples are buffered this long (data time) before evaluation so
    /// slightly late arrivals still land in order.
    pub reorder_tolerance: Duration,
    /// Wall-clock heartbeat interval, if any.
    pub heartbeat: Option<std::time::Duration>,
}

impl Default for FollowOptions {
    fn default() -> Self {
        FollowOptions {
            reorder_tolerance: Duration::seconds(DEFAULT_REORDER_TOLERANCE_SECS as i64),
            heartbeat: None,
        }
    }
}

/// Tail-style incremental consumption: parse lines as they arrive,
/// buffer them for the reorder tolerance, release in timestamp order.
/// Returns with a report when the source ends.
///
/// `on_heartbeat` is called with the number of samples accepted so far,
/// every `options.heartbeat` of wall time, including while idle.
pub fn follow<R: BufRead + Send + 'static>(
    source: R,
    format: InputFormat,
    source_name: &str,
    ctx: RunContext<'_>,
    options: FollowOptions,
    mut on_heartbeat: Option<&mut dyn FnMut(usize)>,
) -> Result<RunReport, IngestError> {
    let started = Instant::now();
    let (tx_lines, rx_lines) = mpsc::channel::<std::io::Result<(usize, String)>>();
    let reader_handle = std::thread::spawn(move || {
        for (idx, line) in source.lines().enumerate() {
            let message = line.map(|l| (idx + 1, l));
            if tx_lines.send(message).is_err() {
                return;
            }
        }
    });

    let mut batch = RecordBatch {
        source: source_name.to_string(),
        ..Default::default()
    };
    let mut saw_header = false;
    let mut buffer: BTreeMap<DateTime<Utc>, Vec<Sample>> = BTreeMap::new();
    let mut max_seen: Option<DateTime<Utc>> = None;
    let mut released_up_to: Option<DateTime<Utc>> = None;

    let RunContext {
        thresholds,
        staleness,
        engine,
        store,
        notifier,
    } = ctx;
    let mut pipeline = Pipeline::new(thresholds, staleness, engine, store, notifier.as_ref());
    let mut last_heartbeat = Instant::now();
    let mut io_error: Option<std::io::Error> = None;
    // A watch can run for weeks; only counters and a bounded sample of
    // reject details are retained.
    let mut accepted_total = 0usize;
    let mut rejected_total = 0usize;
    const MAX_REJECT_DETAIL: usize = 100;

    'main: loop {
        match rx_lines.recv_timeout(std::time::Duration::from_millis(50)) {
            Ok(Ok((line_no, line))) => {
                let rejects_before = batch.rejected.len();
                ingest_line(&mut batch, &mut saw_header, format, line_no, &line);
                if let Some(sample) = batch.samples.pop() {
                    if released_up_to.is_some_and(|floor| sample.timestamp <= floor) {
                        let floor = released_up_to.expect("checked");
                        batch.rejected.push(ParseError {
                            line: line_no,
                            reason: ParseReason::LateSample {
                                late_secs: (floor - sample.timestamp).num_seconds(),
                            },
                        });
                    } else {
                        accepted_total += 1;
                        max_seen = Some(max_seen.map_or(sample.timestamp, |m| m.max(sample.timestamp)));
                        buffer.entry(sample.timestamp).or_default().push(sample);
                    }
                }
                if batch.rejected.len() > rejects_before {
                    rejected_total += batch.rejected.len() - rejects_before;
                    batch.rejected.truncate(MAX_REJECT_DETAIL);
                }
                if let Some(watermark) = max_seen.map(|m| m - options.reorder_tolerance) {
                    release_groups(&mut pipeline, &mut buffer, Some(watermark), &mut released_up_to)?;
                }
            }
            Ok(Err(err)) => {
                // Source went away: flush what we have, then report.
                io_error = Some(err);
                break 'main;
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {}
            Err(mpsc::RecvTimeoutError::Disconnected) => break 'main,
        }

        if let (Some(interval), Some(callback)) = (options.heartbeat, on_heartbeat.as_deref_mut()) {
            if last_heartbeat.elapsed() >= interval {
                last_heartbeat = Instant::now();
                callback(accepted_total);
            }
        }
    }

    release_groups(&mut pipeline, &mut buffer, None, &mut released_up_to)?;
    let _ = reader_handle.join();

    if let Some(err) = io_error {
        // Source disappeared: the run still shuts down cleanly with a
        // report; the reason travels in the reject list.
        batch.rejected.push(ParseError {
            line: 0,
            reason: ParseReason::SourceError(err.to_string()),
        });
        rejected_total += 1;
    }
    let mut report = pipeline.into_report(batch, started);
    report.accepted = accepted_total;
    report.rejected = rejected_total;
    Ok(finish(report, notifier))
}

/// Releases every buffered timestamp group at or below the watermark
/// (all of them when `watermark` is `None`), in timestamp order.
fn release_groups(
    pipeline: &mut Pipeline<'_>,
    buffer: &mut BTreeMap<DateTime<Utc>, Vec<Sample>>,
    watermark: Option<DateTime<Utc>>,
    released_up_to: &mut Option<DateTime<Utc>>,
) -> Result<(), IngestError> {
    loop {
        let ts = match buffer.keys().next().copied() {
            Some(ts) => ts,
            None => return Ok(()),
        };
        if let Some(watermark) = watermark {
            if ts > watermark {
                return Ok(());
            }
        }
        let mut samples = buffer.remove(&ts).expect("key just observed");
        samples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut idx = 0;
        while idx < samples.len() {
            let tx = samples[idx].transformer_id.clone();
            let mut end = idx;
            while end < samples.len() && samples[end].transformer_id == tx {
                end += 1;
            }
            pipeline.process_group(&tx, ts, &samples[idx..end])?;
            idx = end;
        }
        *released_up_to = Some(ts);
    }
}
