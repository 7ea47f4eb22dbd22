//! Textual event reporting over the store: a chronological table or CSV.

use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::engine::EventFrame;
use crate::notify::format_value;

/// E.g. "3h 12m" or "1d 2h"; sub-minute ages render as "0m".
pub fn humanize_age(from: DateTime<Utc>, now: DateTime<Utc>) -> String {
    let mut secs = (now - from).num_seconds();
    if secs < 0 {
        secs = 0;
    }
    let days = secs / 86_400;
    let hours = (secs % 86_400) / 3600;
    let minutes = (secs % 3600) / 60;
    if days > 0 {
        format!("{days}d {hours}h")
    } else if hours > 0 {
        format!("{hours}h {minutes}m")
    } else {
        format!("{minutes}m")
    }
}

fn trend_cell(frame: &EventFrame) -> String {
    match frame.trend_value {
        Some(v) => format_value(v),
        None => "n/a".into(),
    }
}

/// Chronological text table: time, transformer, gas, values, bands,
/// severity and time before `now`.
pub fn render_table(frames: &[EventFrame], now: DateTime<Utc>) -> String {
    if frames.is_empty() {
        return "0 events\n".into();
    }
    let mut rows = Vec::with_capacity(frames.len() + 1);
    rows.push([
        "time".to_string(),
        "transformer".to_string(),
        "gas".to_string(),
        "conc".to_string(),
        "trend".to_string(),
        "bands".to_string(),
        "severity".to_string(),
        "age".to_string(),
    ]);
    for frame in frames {
        rows.push([
            frame
                .triggered_at
                .to_rfc3339_opts(SecondsFormat::Secs, true),
            frame.transformer_id.clone(),
            frame.gas.name().to_string(),
            format_value(frame.conc_value),
            trend_cell(frame),
            format!("({},{})", frame.conc_band, frame.trend_band),
            frame.severity.name().to_string(),
            humanize_age(frame.triggered_at, now),
        ]);
    }
    let mut widths = [0usize; 8];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (w, cell) in widths.iter().zip(row) {
            let _ = write!(line, "{cell:<w$}  ");
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    let _ = writeln!(out, "{} events", frames.len());
    out
}

/// Machine-readable variant with the same columns.
pub fn render_csv(frames: &[EventFrame], now: DateTime<Utc>) -> String {
    let mut out =
        String::from("time,transformer_id,gas,conc_value,conc_band,trend_value,trend_band,severity,secs_before_now\n");
    for frame in frames {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            frame
                .triggered_at
                .to_rfc3339_opts(SecondsFormat::Secs, true),
            frame.transformer_id,
            frame.gas,
            frame.conc_value,
            frame.conc_band,
            frame.trend_value.map(|v| v.to_string()).unwrap_or_default(),
            frame.trend_band,
            frame.severity,
            (now - frame.triggered_at).num_seconds().max(0)
        );
    }
    out
}
