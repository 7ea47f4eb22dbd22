//! Rendering of event frames into operator notifications and delivery to
//! the configured sinks.
//!
//! Rendering is a pure function of (frame, template): identical inputs
//! produce byte-identical payloads. Delivery runs on one worker thread
//! per sink, off the analysis path; a failed delivery is recorded and
//! never disturbs the engine or the event store.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::SecondsFormat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EventFrame;

/// Formats a number with at most five significant digits, trailing zeros
/// trimmed.
pub fn format_value(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if magnitude >= 5 {
        let factor = 10f64.powi(magnitude - 4);
        return format!("{}", (x / factor).round() * factor);
    }
    let decimals = (4 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("unbalanced braces in template at byte {0}")]
    UnbalancedBraces(usize),
}

/// Notification template. The subject pattern accepts the placeholders
/// `{gas}`, `{severity}`, `{transformer}`, `{time}`, `{event_id}`,
/// `{conc_band}` and `{trend_band}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Template {
    pub subject: String,
    pub report_url: Option<String>,
}

impl Default for Template {
    fn default() -> Self {
        Template {
            subject: "{gas} {severity} {transformer} {time}".into(),
            report_url: None,
        }
    }
}

impl Template {
    /// Checks the subject pattern without needing a frame.
    pub fn validate(&self) -> Result<(), TemplateError> {
        scan_placeholders(&self.subject, |key, at| {
            if PLACEHOLDERS.contains(&key) {
                Ok(())
            } else {
                let _ = at;
                Err(TemplateError::UnknownPlaceholder(key.to_string()))
            }
        })
    }
}

const PLACEHOLDERS: [&str; 7] = [
    "gas",
    "severity",
    "transformer",
    "time",
    "event_id",
    "conc_band",
    "trend_band",
];

fn scan_placeholders(
    pattern: &str,
    mut on_key: impl FnMut(&str, usize) -> Result<(), TemplateError>,
) -> Result<(), TemplateError> {
    let bytes = pattern.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' => {
                let close = pattern[i + 1..]
                    .find(['{', '}'])
                    .map(|off| i + 1 + off)
                    .ok_or(TemplateError::UnbalancedBraces(i))?;
                if bytes[close] == b'{' {
                    return Err(TemplateError::UnbalancedBraces(i));
                }
                on_key(&pattern[i + 1..close], i)?;
                i = close + 1;
            }
            b'}' => return Err(TemplateError::UnbalancedBraces(i)),
            _ => i += 1,
        }
    }
    Ok(())
}

fn expand(pattern: &str, frame: &EventFrame) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(pattern.len() + 32);
    let mut last = 0;
    scan_placeholders(pattern, |key, at| {
        out.push_str(&pattern[last..at]);
        match key {
            "gas" => out.push_str(frame.gas.name()),
            "severity" => out.push_str(frame.severity.name()),
            "transformer" => out.push_str(&frame.transformer_id),
            "time" => out.push_str(
                &frame
                    .triggered_at
                    .to_rfc3339_opts(SecondsFormat::Secs, true),
            ),
            "event_id" => out.push_str(&frame.event_id),
            "conc_band" => {
                let _ = write!(out, "{}", frame.conc_band);
            }
            "trend_band" => {
                let _ = write!(out, "{}", frame.trend_band);
            }
            other => return Err(TemplateError::UnknownPlaceholder(other.to_string())),
        }
        last = at + key.len() + 2;
        Ok(())
    })?;
    out.push_str(&pattern[last..]);
    Ok(out)
}

/// A rendered notification: subject, sectioned body text and the
/// structured frame it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationPayload {
    pub subject: String,
    pub body: String,
    pub frame: EventFrame,
    /// Filled in when handed to a sink.
    pub destination: Option<String>,
}

/// Renders one event frame. The body carries, in order: the event header,
/// the "Gas Concentration and Concentration Trend" section, the
/// "Ratio analysis" section and the "Total Dissolved Combustible Gas
/// Analysis" section, plus an optional report URL.
pub fn render(frame: &EventFrame, template: &Template) -> Result<NotificationPayload, TemplateError> {
    let subject = expand(&template.subject, frame)?;
    let time = frame
        .triggered_at
        .to_rfc3339_opts(SecondsFormat::Secs, true);

    let mut body = String::new();
    let _ = writeln!(body, "Event: {subject}");
    let _ = writeln!(
        body,
        "Name: {} level {} notification",
        frame.gas, frame.conc_band
    );
    let _ = writeln!(body, "Start Time: {time}");
    let _ = writeln!(body, "Target: {}", frame.transformer_id);
    let _ = writeln!(body, "Severity: {}", frame.severity);
    let _ = writeln!(body, "Send Time: {time}");
    body.push('\n');

    body.push_str("Gas Concentration and Concentration Trend\n");
    for channel in &frame.channels {
        let label = match channel.kind {
            crate::model::MeasurementKind::Concentration => "Concentration",
            crate::model::MeasurementKind::Trend => "Concentration Trend",
        };
        let _ = writeln!(
            body,
            " {} {label} : {}",
            channel.species,
            format_value(channel.value)
        );
    }
    body.push('\n');

    body.push_str("Ratio analysis\n");
    for (ratio, value) in frame.ratios.iter() {
        let rendered = match value.value() {
            Some(v) => format_value(v),
            None => match value {
                crate::analysis::RatioValue::Undefined { undefined } => {
                    format!("n/a ({undefined})")
                }
                crate::analysis::RatioValue::Defined { .. } => unreachable!(),
            },
        };
        let _ = writeln!(body, " {} {}: {rendered}", ratio.label(), ratio.formula());
    }
    body.push('\n');

    body.push_str("Total Dissolved Combustible Gas Analysis\n");
    match &frame.tdcg {
        crate::analysis::TdcgResult::Available { value } => {
            let _ = writeln!(body, " TDCG : {}", format_value(*value));
        }
        crate::analysis::TdcgResult::Unavailable { unavailable } => {
            let names: Vec<&str> = unavailable.iter().map(|g| g.name()).collect();
            let _ = writeln!(body, " TDCG : n/a (missing: {})", names.join(", "));
        }
    }

    if let Some(url) = &template.report_url {
        body.push('\n');
        let _ = writeln!(body, "Report URL: {url}");
    }

    Ok(NotificationPayload {
        subject,
        body,
        frame: frame.clone(),
        destination: None,
    })
}

/// Where notifications go.
#[derive(Debug, Clone, PartialEq)]
pub enum Sink {
    Stdout,
    File(PathBuf),
    Webhook { url: String, timeout: Duration },
}

impl Sink {
    pub fn describe(&self) -> String {
        match self {
            Sink::Stdout => "stdout".into(),
            Sink::File(path) => format!("file:{}", path.display()),
            Sink::Webhook { url, .. } => format!("webhook:{url}"),
        }
    }
}

/// Backoff schedule between delivery attempts; total attempts are
/// `backoff.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            backoff: vec![
                Duration::from_secs(1),
                Duration::from_secs(2),
                Duration::from_secs(4),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DeliveryOutcome {
    Delivered,
    Failed(String),
}

/// One delivery attempt trail for one (event, sink) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryRecord {
    pub event_id: String,
    pub destination: String,
    pub attempts: u32,
    pub outcome: DeliveryOutcome,
}

impl DeliveryRecord {
    pub fn delivered(&self) -> bool {
        self.outcome == DeliveryOutcome::Delivered
    }
}

#[derive(Serialize)]
struct WebhookBody<'a> {
    subject: &'a str,
    body: &'a str,
    frame: &'a EventFrame,
}

fn deliver_once(payload: &NotificationPayload, sink: &Sink) -> Result<(), String> {
    match sink {
        Sink::Stdout => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            write!(out, "Subject: {}\n{}\n", payload.subject, payload.body)
                .and_then(|_| out.flush())
                .map_err(|e| e.to_string())
        }
        Sink::File(path) => {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| e.to_string())?;
            write!(file, "Subject: {}\n{}\n", payload.subject, payload.body)
                .map_err(|e| e.to_string())
        }
        Sink::Webhook { url, timeout } => {
            let client = reqwest::blocking::Client::builder()
                .timeout(*timeout)
                .build()
                .map_err(|e| e.to_string())?;
            let body = serde_json::to_string(&WebhookBody {
                subject: &payload.subject,
                body: &payload.body,
                frame: &payload.frame,
            })
            .expect("payload serializes");
            let response = client
                .post(url)
                .header("content-type", "application/json")
                .body(body)
                .send()
                .map_err(|e| e.to_string())?;
            if response.status().is_success() {
                Ok(())
            } else {
                Err(format!("HTTP {}", response.status().as_u16()))
            }
        }
    }
}

/// Delivers one payload to one sink, retrying per the policy. Always
/// returns a record; failures are data, not panics.
pub fn dispatch(payload: &NotificationPayload, sink: &Sink, retry: &RetryPolicy) -> DeliveryRecord {
    let destination = payload
        .destination
        .clone()
        .unwrap_or_else(|| sink.describe());
    let max_attempts = retry.backoff.len() + 1;
    let mut last_error = String::new();
    for attempt in 1..=max_attempts {
        match deliver_once(payload, sink) {
            Ok(()) => {
                return DeliveryRecord {
                    event_id: payload.frame.event_id.clone(),
                    destination,
                    attempts: attempt as u32,
                    outcome: DeliveryOutcome::Delivered,
                }
            }
            Err(err) => {
                last_error = err;
                if attempt < max_attempts {
                    std::thread::sleep(retry.backoff[attempt - 1]);
                }
            }
        }
    }
    DeliveryRecord {
        event_id: payload.frame.event_id.clone(),
        destination,
        attempts: max_attempts as u32,
        outcome: DeliveryOutcome::Failed(last_error),
    }
}

/// Aggregate delivery results for one run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct NotifySummary {
    pub delivered: usize,
    pub failed: usize,
    pub records: Vec<DeliveryRecord>,
}

/// Asynchronous notification fan-out: one worker per sink, deliveries in
/// submission order, at most one successful delivery per (event, sink)
/// per run.
pub struct Notifier {
    template: Template,
    workers: Vec<Worker>,
    records: Arc<Mutex<Vec<DeliveryRecord>>>,
}

struct Worker {
    sender: mpsc::Sender<NotificationPayload>,
    handle: JoinHandle<()>,
}

impl Notifier {
    pub fn new(sinks: Vec<Sink>, template: Template, retry: RetryPolicy) -> Result<Self, TemplateError> {
        template.validate()?;
        let records = Arc::new(Mutex::new(Vec::new()));
        let workers = sinks
            .into_iter()
            .map(|sink| {
                let (sender, receiver) = mpsc::channel::<NotificationPayload>();
                let records = Arc::clone(&records);
                let retry = retry.clone();
                let handle = std::thread::spawn(move || {
                    let mut seen: HashSet<String> = HashSet::new();
                    for payload in receiver {
                        if !seen.insert(payload.frame.event_id.clone()) {
                            continue;
                        }
                        let record = dispatch(&payload, &sink, &retry);
                        records.lock().expect("records lock").push(record);
                    }
                });
                Worker { sender, handle }
            })
            .collect();
        Ok(Notifier {
            template,
            workers,
            records,
        })
    }

    /// Renders the frame once and queues it for every sink.
    pub fn submit(&self, frame: &EventFrame) {
        let payload = match render(frame, &self.template) {
            Ok(p) => p,
            // The template was validated at construction; treat a failure
            // here as a failed delivery rather than a crash.
            Err(err) => {
                self.records.lock().expect("records lock").push(DeliveryRecord {
                    event_id: frame.event_id.clone(),
                    destination: "render".into(),
                    attempts: 0,
                    outcome: DeliveryOutcome::Failed(err.to_string()),
                });
                return;
            }
        };
        for worker in &self.workers {
            let _ = worker.sender.send(payload.clone());
        }
    }

    /// Waits for every queued delivery to finish and returns the summary.
    pub fn drain(self) -> NotifySummary {
        let Notifier {
            workers, records, ..
        } = self;
        for worker in workers {
            // Closing the channel lets the worker run off its queue.
            drop(worker.sender);
            let _ = worker.handle.join();
        }
        let records = Arc::try_unwrap(records)
            .map(|m| m.into_inner().expect("records lock"))
            .unwrap_or_else(|arc| arc.lock().expect("records lock").clone());
        let delivered = records.iter().filter(|r| r.delivered()).count();
        NotifySummary {
            delivered,
            failed: records.len() - delivered,
            records,
        }
    }
}
