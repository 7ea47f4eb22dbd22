//! Stateful per-transformer event generation.
//!
//! Each key gas escalates independently. An event fires when the graded
//! severity rises above the last emitted level for that gas, or when the
//! severity is unchanged but either band stepped up since the last
//! emission. After severity has stayed strictly below the last emitted
//! level for a full re-arm period, the gas re-arms: its baseline resets
//! to the current level (emitting once more if that level is still
//! notable). Typical never emits.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisResult, ChannelValue, RatioReport, TdcgResult, TrendSource};
use crate::model::{Band, GasSpecies, Severity};

/// Default sustained-quiet period before a gas re-arms.
pub const DEFAULT_REARM_SECS: u64 = 24 * 3600;

/// Default tolerated timestamp regression between successive steps.
pub const DEFAULT_REORDER_TOLERANCE_SECS: u64 = 5 * 60;

/// A generated event with its full diagnostic context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFrame {
    /// Deterministic: `<transformer>:<gas>:<trigger time, RFC 3339 seconds>`.
    pub event_id: String,
    pub transformer_id: String,
    pub gas: GasSpecies,
    pub triggered_at: DateTime<Utc>,
    pub severity: Severity,
    pub conc_value: f64,
    pub conc_band: Band,
    pub trend_value: Option<f64>,
    pub trend_band: Band,
    pub trend_source: Option<TrendSource>,
    pub ratios: RatioReport,
    pub tdcg: TdcgResult,
    /// All fresh key-gas concentration/trend values at trigger time.
    pub channels: Vec<ChannelValue>,
}

/// Deterministic event identifier.
pub fn event_id(transformer_id: &str, gas: GasSpecies, triggered_at: DateTime<Utc>) -> String {
    format!(
        "{}:{}:{}",
        transformer_id,
        gas,
        triggered_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildFrameError {
    #[error("analysis result for {transformer_id} carries no assessment for {gas}")]
    MissingAssessment {
        transformer_id: String,
        gas: GasSpecies,
    },
}

/// Builds an [`EventFrame`] for one assessed gas out of an analysis
/// result. Building twice from the same result yields identical frames.
pub fn build_frame(result: &AnalysisResult, gas: GasSpecies) -> Result<EventFrame, BuildFrameError> {
    let assessment = result
        .assessment(gas)
        .ok_or_else(|| BuildFrameError::MissingAssessment {
            transformer_id: result.transformer_id.clone(),
            gas,
        })?;
    Ok(EventFrame {
        event_id: event_id(&result.transformer_id, gas, result.timestamp),
        transformer_id: result.transformer_id.clone(),
        gas,
        triggered_at: result.timestamp,
        severity: assessment.severity,
        conc_value: assessment.conc_value,
        conc_band: assessment.conc_band,
        trend_value: assessment.trend.map(|t| t.value),
        trend_band: assessment.trend_band,
        trend_source: assessment.trend.map(|t| t.source),
        ratios: result.ratios,
        tdcg: result.tdcg.clone(),
        channels: result.channels.clone(),
    })
}

/// Emission bookkeeping for one (transformer, gas) pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GasState {
    pub last_emitted_severity: Severity,
    pub last_emission_time: Option<DateTime<Utc>>,
    pub last_emitted_bands: Option<(Band, Band)>,
    /// Start of the current run of severities strictly below
    /// `last_emitted_severity`.
    pub below_since: Option<DateTime<Utc>>,
}

/// Per-transformer, per-gas engine state. Evolves only through
/// [`Engine::step`]; identical step sequences yield identical states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineState {
    gases: BTreeMap<(String, GasSpecies), GasState>,
    last_step: BTreeMap<String, DateTime<Utc>>,
}

impl EngineState {
    pub fn gas(&self, transformer_id: &str, gas: GasSpecies) -> Option<&GasState> {
        self.gases.get(&(transformer_id.to_string(), gas))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub rearm_period: Duration,
    pub reorder_tolerance: Duration,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            rearm_period: Duration::seconds(DEFAULT_REARM_SECS as i64),
            reorder_tolerance: Duration::seconds(DEFAULT_REORDER_TOLERANCE_SECS as i64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(
        "out-of-order input for {transformer_id}: {timestamp} regresses more than {tolerance_secs}s behind {last_seen}"
    )]
    OutOfOrderInput {
        transformer_id: String,
        timestamp: DateTime<Utc>,
        last_seen: DateTime<Utc>,
        tolerance_secs: i64,
    },
}

/// The event generator. One engine serializes all steps for the
/// transformers it owns; run one engine per independent stream.
#[derive(Debug, Clone, Default)]
pub struct Engine {
    config: EngineConfig,
    state: EngineState,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        Engine {
            config,
            state: EngineState::default(),
        }
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Feeds one analysis result through the escalation state machine and
    /// returns the event frames it triggers, in canonical gas order.
    ///
    /// Timestamps must be nondecreasing per transformer; a regression
    /// within the reorder tolerance is clamped to the last seen instant,
    /// anything further back is rejected.
    pub fn step(&mut self, result: &AnalysisResult) -> Result<Vec<EventFrame>, EngineError> {
        let tx = result.transformer_id.as_str();
        let mut now = result.timestamp;
        if let Some(&last_seen) = self.state.last_step.get(tx) {
            if now < last_seen {
                if last_seen - now > self.config.reorder_tolerance {
                    return Err(EngineError::OutOfOrderInput {
                        transformer_id: tx.to_string(),
                        timestamp: now,
                        last_seen,
                        tolerance_secs: self.config.reorder_tolerance.num_seconds(),
                    });
                }
                // Small regression: state time never moves backwards.
                now = last_seen;
            }
        }
        self.state.last_step.insert(tx.to_string(), now);

        let mut frames = Vec::new();
        for assessment in &result.assessments {
            let severity = assessment.severity;
            let bands = (assessment.conc_band, assessment.trend_band);
            let state = self
                .state
                .gases
                .entry((tx.to_string(), assessment.species))
                .or_default();

            let mut emit = false;
            if severity < state.last_emitted_severity {
                let since = *state.below_since.get_or_insert(now);
                if now - since >= self.config.rearm_period {
                    // Sustained quiet: reset the baseline to the current
                    // level, announcing it once more if still notable.
                    state.last_emitted_severity = severity;
                    state.below_since = None;
                    if severity >= Severity::Atypical {
                        emit = true;
                    } else {
                        state.last_emitted_bands = None;
                    }
                }
            } else if severity > state.last_emitted_severity {
                state.below_since = None;
                state.last_emitted_severity = severity;
                emit = true;
            } else {
                // Severity unchanged: only a band escalation since the
                // last emission fires.
                state.below_since = None;
                if severity > Severity::Typical {
                    if let Some((cb, tb)) = state.last_emitted_bands {
                        if bands.0 > cb || bands.1 > tb {
                            emit = true;
                        }
                    }
                }
            }

            if emit {
                state.last_emission_time = Some(now);
                state.last_emitted_bands = Some(bands);
                let frame = build_frame(result, assessment.species)
                    .expect("assessment present for emitted gas");
                frames.push(frame);
            }
        }
        Ok(frames)
    }
}
