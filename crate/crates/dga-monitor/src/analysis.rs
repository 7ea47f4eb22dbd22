//! Stateless analytics over a snapshot of the latest channel values:
//! band classification, severity lookup, the five gas ratios, total
//! dissolved combustible gas, and least-squares trend estimation.
//!
//! Everything here is a pure function of its inputs.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Band, GasSpecies, MeasurementKind, Severity, ThresholdConfig};

/// Default age limit after which a snapshot entry no longer counts as
/// fresh (twice the slowest expected sampler cadence).
pub const DEFAULT_STALENESS_SECS: u64 = 48 * 3600;

/// Latest value seen on one (species, kind) channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEntry {
    pub value: f64,
    pub observed_at: DateTime<Utc>,
}

/// Freshness of one channel at the snapshot's evaluation instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelState {
    Fresh(ChannelEntry),
    Stale(ChannelEntry),
    Absent,
}

impl ChannelState {
    pub fn fresh_value(&self) -> Option<f64> {
        match self {
            ChannelState::Fresh(e) => Some(e.value),
            _ => None,
        }
    }
}

/// Latest per-channel values for one transformer at an evaluation instant.
///
/// At most one entry per (species, kind); recording a newer observation
/// replaces the older one. Entries older than the staleness limit are
/// excluded from downstream computation.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub transformer_id: String,
    pub taken_at: DateTime<Utc>,
    pub staleness_limit: Duration,
    entries: BTreeMap<(GasSpecies, MeasurementKind), ChannelEntry>,
}

impl Snapshot {
    pub fn new(transformer_id: impl Into<String>, taken_at: DateTime<Utc>) -> Self {
        Snapshot {
            transformer_id: transformer_id.into(),
            taken_at,
            staleness_limit: Duration::seconds(DEFAULT_STALENESS_SECS as i64),
            entries: BTreeMap::new(),
        }
    }

    pub fn with_staleness(mut self, limit: Duration) -> Self {
        self.staleness_limit = limit;
        self
    }

    /// Records an observation; keeps whichever observation is newest
    /// (ties go to the later call).
    pub fn record(
        &mut self,
        species: GasSpecies,
        kind: MeasurementKind,
        value: f64,
        observed_at: DateTime<Utc>,
    ) {
        let entry = ChannelEntry { value, observed_at };
        self.entries
            .entry((species, kind))
            .and_modify(|e| {
                if observed_at >= e.observed_at {
                    *e = entry;
                }
            })
            .or_insert(entry);
    }

    pub fn channel(&self, species: GasSpecies, kind: MeasurementKind) -> ChannelState {
        match self.entries.get(&(species, kind)) {
            None => ChannelState::Absent,
            Some(e) => {
                if self.taken_at - e.observed_at <= self.staleness_limit {
                    ChannelState::Fresh(*e)
                } else {
                    ChannelState::Stale(*e)
                }
            }
        }
    }

    pub fn fresh(&self, species: GasSpecies, kind: MeasurementKind) -> Option<ChannelEntry> {
        match self.channel(species, kind) {
            ChannelState::Fresh(e) => Some(e),
            _ => None,
        }
    }
}

/// Why a ratio could not be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioUndefined {
    MissingDenominator,
    StaleDenominator,
    NonpositiveDenominator,
    MissingNumerator,
    StaleNumerator,
    NegativeNumerator,
}

impl RatioUndefined {
    pub fn reason(&self) -> &'static str {
        match self {
            RatioUndefined::MissingDenominator => "missing denominator",
            RatioUndefined::StaleDenominator => "stale denominator",
            RatioUndefined::NonpositiveDenominator => "nonpositive denominator",
            RatioUndefined::MissingNumerator => "missing numerator",
            RatioUndefined::StaleNumerator => "stale numerator",
            RatioUndefined::NegativeNumerator => "negative numerator",
        }
    }
}

impl fmt::Display for RatioUndefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason())
    }
}

/// A computed ratio, or the reason it is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatioValue {
    Defined { value: f64 },
    Undefined { undefined: RatioUndefined },
}

impl RatioValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            RatioValue::Defined { value } => Some(*value),
            RatioValue::Undefined { .. } => None,
        }
    }
}

/// The five combustible-gas ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ratio {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl Ratio {
    pub const ALL: [Ratio; 5] = [Ratio::R1, Ratio::R2, Ratio::R3, Ratio::R4, Ratio::R5];

    pub fn label(&self) -> &'static str {
        match self {
            Ratio::R1 => "R1",
            Ratio::R2 => "R2",
            Ratio::R3 => "R3",
            Ratio::R4 => "R4",
            Ratio::R5 => "R5",
        }
    }

    pub fn numerator(&self) -> GasSpecies {
        match self {
            Ratio::R1 => GasSpecies::CH4,
            Ratio::R2 => GasSpecies::C2H2,
            Ratio::R3 => GasSpecies::C2H2,
            Ratio::R4 => GasSpecies::C2H6,
            Ratio::R5 => GasSpecies::C2H4,
        }
    }

    pub fn denominator(&self) -> GasSpecies {
        match self {
            Ratio::R1 => GasSpecies::H2,
            Ratio::R2 => GasSpecies::C2H4,
            Ratio::R3 => GasSpecies::CH4,
            Ratio::R4 => GasSpecies::C2H2,
            Ratio::R5 => GasSpecies::C2H6,
        }
    }

    /// E.g. `"CH4/H2"`.
    pub fn formula(&self) -> String {
        format!("{}/{}", self.numerator(), self.denominator())
    }
}

/// All five ratios computed from one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub r1: RatioValue,
    pub r2: RatioValue,
    pub r3: RatioValue,
    pub r4: RatioValue,
    pub r5: RatioValue,
}

impl RatioReport {
    pub fn get(&self, ratio: Ratio) -> RatioValue {
        match ratio {
            Ratio::R1 => self.r1,
            Ratio::R2 => self.r2,
            Ratio::R3 => self.r3,
            Ratio::R4 => self.r4,
            Ratio::R5 => self.r5,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Ratio, RatioValue)> + '_ {
        Ratio::ALL.into_iter().map(move |r| (r, self.get(r)))
    }
}

/// Total dissolved combustible gas: present only when all six species
/// have fresh concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TdcgResult {
    Available { value: f64 },
    Unavailable { unavailable: Vec<GasSpecies> },
}

impl TdcgResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            TdcgResult::Available { value } => Some(*value),
            TdcgResult::Unavailable { .. } => None,
        }
    }
}

/// Where an assessment's trend value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendSource {
    /// The device reported a trend channel and it was fresh.
    Reported,
    /// Estimated from the concentration history by least squares.
    Estimated,
}

/// A trend observation attached to a gas assessment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendReading {
    pub value: f64,
    pub source: TrendSource,
}

/// Classification of one key gas at one evaluation instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasAssessment {
    pub species: GasSpecies,
    pub conc_value: f64,
    pub conc_band: Band,
    /// Absent when no trend channel is fresh and history is insufficient;
    /// the trend band then degrades to band 1.
    pub trend: Option<TrendReading>,
    pub trend_band: Band,
    pub severity: Severity,
}

/// One fresh channel value carried along for event payloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelValue {
    pub species: GasSpecies,
    pub kind: MeasurementKind,
    pub value: f64,
}

/// Full analysis output for one transformer at one instant: key-gas
/// assessments plus the supplementary ratio and TDCG diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub transformer_id: String,
    pub timestamp: DateTime<Utc>,
    /// Assessments for key gases with fresh concentration data, in
    /// canonical species order.
    pub assessments: Vec<GasAssessment>,
    pub ratios: RatioReport,
    pub tdcg: TdcgResult,
    /// All fresh key-gas concentration and trend channel values at the
    /// evaluation instant, for notification payloads.
    pub channels: Vec<ChannelValue>,
}

impl AnalysisResult {
    pub fn assessment(&self, gas: GasSpecies) -> Option<&GasAssessment> {
        self.assessments.iter().find(|a| a.species == gas)
    }

    /// Highest severity across the key-gas assessments.
    pub fn max_severity(&self) -> Severity {
        self.assessments
            .iter()
            .map(|a| a.severity)
            .max()
            .unwrap_or(Severity::Typical)
    }
}

/// Maps a value onto one of the four bands induced by three ascending
/// limits. Comparisons are inclusive at the lower bound: a value at L_k
/// enters band k+1. Negative values land in band 1.
pub fn classify(value: f64, limits: &[f64; 3]) -> Band {
    if value >= limits[2] {
        Band::B4
    } else if value >= limits[1] {
        Band::B3
    } else if value >= limits[0] {
        Band::B2
    } else {
        Band::B1
    }
}

/// Looks up severity for a (concentration band, trend band) pair.
pub fn severity_lookup(conc_band: Band, trend_band: Band, matrix: &crate::model::SeverityMatrix) -> Severity {
    matrix.lookup(conc_band, trend_band)
}

fn ratio_from(snapshot: &Snapshot, ratio: Ratio) -> RatioValue {
    use ChannelState::{Absent, Fresh, Stale};
    let num = match snapshot.channel(ratio.numerator(), MeasurementKind::Concentration) {
        Fresh(e) => e.value,
        Stale(_) => {
            return RatioValue::Undefined {
                undefined: RatioUndefined::StaleNumerator,
            }
        }
        Absent => {
            return RatioValue::Undefined {
                undefined: RatioUndefined::MissingNumerator,
            }
        }
    };
    let den = match snapshot.channel(ratio.denominator(), MeasurementKind::Concentration) {
        Fresh(e) => e.value,
        Stale(_) => {
            return RatioValue::Undefined {
                undefined: RatioUndefined::StaleDenominator,
            }
        }
        Absent => {
            return RatioValue::Undefined {
                undefined: RatioUndefined::MissingDenominator,
            }
        }
    };
    if den <= 0.0 {
        return RatioValue::Undefined {
            undefined: RatioUndefined::NonpositiveDenominator,
        };
    }
    if num < 0.0 {
        return RatioValue::Undefined {
            undefined: RatioUndefined::NegativeNumerator,
        };
    }
    RatioValue::Defined { value: num / den }
}

/// Computes the five gas ratios from the snapshot's fresh concentration
/// entries. Problematic channels yield `Undefined` with the reason;
/// nothing here divides by zero or returns infinities.
pub fn compute_ratios(snapshot: &Snapshot) -> RatioReport {
    RatioReport {
        r1: ratio_from(snapshot, Ratio::R1),
        r2: ratio_from(snapshot, Ratio::R2),
        r3: ratio_from(snapshot, Ratio::R3),
        r4: ratio_from(snapshot, Ratio::R4),
        r5: ratio_from(snapshot, Ratio::R5),
    }
}

/// Sums the six fresh concentration values; `Unavailable` lists every
/// species whose concentration is missing or stale.
pub fn compute_tdcg(snapshot: &Snapshot) -> TdcgResult {
    let mut sum = 0.0;
    let mut missing = Vec::new();
    for gas in GasSpecies::ALL {
        match snapshot.fresh(gas, MeasurementKind::Concentration) {
            Some(e) => sum += e.value,
            None => missing.push(gas),
        }
    }
    if missing.is_empty() {
        TdcgResult::Available { value: sum }
    } else {
        TdcgResult::Unavailable {
            unavailable: missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error("need at least 2 points inside the window, found {0}")]
    InsufficientData(usize),
    #[error("all in-window timestamps are equal")]
    DegenerateTime,
}

/// Ordinary-least-squares slope of the points inside `[at - window, at]`,
/// in ppm/day.
///
/// Exact on noiseless linear series regardless of sampling irregularity,
/// and invariant under time-shifting the whole series.
pub fn estimate_rate(
    series: &[(DateTime<Utc>, f64)],
    window: Duration,
    at: DateTime<Utc>,
) -> Result<f64, RateError> {
    let start = at - window;
    // Days relative to the window end, so shifted series see identical xs.
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= start && *t <= at)
        .map(|(t, v)| (((*t - at).num_seconds() as f64) / 86_400.0, *v))
        .collect();
    if points.len() < 2 {
        return Err(RateError::InsufficientData(points.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(RateError::DegenerateTime);
    }
    Ok(sxy / sxx)
}

/// Recent concentration series per gas for one transformer, used as the
/// trend-estimation fallback when no reported trend channel is fresh.
#[derive(Debug, Clone, Default)]
pub struct GasHistory {
    series: BTreeMap<GasSpecies, Vec<(DateTime<Utc>, f64)>>,
}

impl GasHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, gas: GasSpecies, at: DateTime<Utc>, value: f64) {
        self.series.entry(gas).or_default().push((at, value));
    }

    pub fn series(&self, gas: GasSpecies) -> &[(DateTime<Utc>, f64)] {
        self.series.get(&gas).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Drops points older than `now - window`.
    pub fn prune(&mut self, now: DateTime<Utc>, window: Duration) {
        let cutoff = now - window;
        for series in self.series.values_mut() {
            series.retain(|(t, _)| *t >= cutoff);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzeError {
    #[error("no fresh key-gas concentration in snapshot for {0}")]
    EmptySnapshot(String),
}

/// Runs the full per-sample evaluation: classify each key gas with fresh
/// concentration data, grade severity from the matrix, and attach the
/// supplementary ratio/TDCG diagnostics.
///
/// Trend precedence per gas: a fresh reported trend channel wins; else the
/// slope estimated from `history` over the configured window; else the
/// trend band degrades to 1 with no trend value.
pub fn analyze(
    snapshot: &Snapshot,
    history: &GasHistory,
    cfg: &ThresholdConfig,
) -> Result<AnalysisResult, AnalyzeError> {
    let mut assessments = Vec::new();
    let mut channels = Vec::new();

    let mut key_gases = GasSpecies::KEY_GASES;
    key_gases.sort();

    for gas in key_gases {
        if let Some(e) = snapshot.fresh(gas, MeasurementKind::Concentration) {
            channels.push(ChannelValue {
                species: gas,
                kind: MeasurementKind::Concentration,
                value: e.value,
            });
        }
        if let Some(e) = snapshot.fresh(gas, MeasurementKind::Trend) {
            channels.push(ChannelValue {
                species: gas,
                kind: MeasurementKind::Trend,
                value: e.value,
            });
        }

        let conc = match snapshot.fresh(gas, MeasurementKind::Concentration) {
            Some(e) => e.value,
            None => continue,
        };
        let limits = cfg.limits_for(gas).expect("key gas has limits");
        let conc_band = classify(conc, &limits.concentration);

        let trend = match snapshot.fresh(gas, MeasurementKind::Trend) {
            Some(e) => Some(TrendReading {
                value: e.value,
                source: TrendSource::Reported,
            }),
            None => estimate_rate(history.series(gas), cfg.trend_window(), snapshot.taken_at)
                .ok()
                .map(|value| TrendReading {
                    value,
                    source: TrendSource::Estimated,
                }),
        };
        let trend_band = match &trend {
            Some(t) => classify(t.value, &limits.trend),
            None => Band::B1,
        };

        assessments.push(GasAssessment {
            species: gas,
            conc_value: conc,
            conc_band,
            trend,
            trend_band,
            severity: cfg.matrix.lookup(conc_band, trend_band),
        });
    }

    if assessments.is_empty() {
        return Err(AnalyzeError::EmptySnapshot(snapshot.transformer_id.clone()));
    }

    Ok(AnalysisResult {
        transformer_id: snapshot.transformer_id.clone(),
        timestamp: snapshot.taken_at,
        assessments,
        ratios: compute_ratios(snapshot),
        tdcg: compute_tdcg(snapshot),
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_thresholds;
    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn snapshot_at(s: &str) -> Snapshot {
        Snapshot::new("TX-1C", ts(s))
    }

    #[test]
    fn classify_failure_case_values() {
        let cfg = default_thresholds();
        let h2 = cfg.limits_for(GasSpecies::H2).unwrap();
        // 333.3 <= 334 < 666.6
        assert_eq!(classify(334.0, &h2.concentration), Band::B2);
        assert_eq!(classify(0.0, &h2.concentration), Band::B1);
        // 8.33 <= 16 < 16.66
        assert_eq!(classify(16.0, &h2.trend), Band::B2);
        let c2h4 = cfg.limits_for(GasSpecies::C2H4).unwrap();
        // inclusive at the lower bound: 200 enters band 4
        assert_eq!(classify(200.0, &c2h4.concentration), Band::B4);
    }

    #[test]
    fn classify_negative_lands_in_band_one() {
        let cfg = default_thresholds();
        let h2 = cfg.limits_for(GasSpecies::H2).unwrap();
        assert_eq!(classify(-48.9, &h2.concentration), Band::B1);
    }

    #[test]
    fn severity_lookup_corners() {
        let m = default_thresholds().matrix;
        assert_eq!(severity_lookup(Band::B1, Band::B1, &m), Severity::Typical);
        assert_eq!(severity_lookup(Band::B2, Band::B4, &m), Severity::Warning);
        assert_eq!(severity_lookup(Band::B4, Band::B4, &m), Severity::Alarm);
        assert_eq!(severity_lookup(Band::B3, Band::B4, &m), Severity::Alarm);
        assert_eq!(severity_lookup(Band::B1, Band::B4, &m), Severity::Warning);
    }

    #[test]
    fn ratios_direct_quotients() {
        let at = ts("2019-06-28T16:43:10Z");
        let mut snap = snapshot_at("2019-06-28T16:43:10Z");
        snap.record(GasSpecies::CH4, MeasurementKind::Concentration, 40.0, at);
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, 80.0, at);
        snap.record(GasSpecies::C2H2, MeasurementKind::Concentration, 1.96, at);
        snap.record(GasSpecies::C2H4, MeasurementKind::Concentration, 68.0, at);
        let report = compute_ratios(&snap);
        assert_eq!(report.r1.value(), Some(0.5));
        // quotient of the notification sample's listed concentrations
        let r2 = report.r2.value().unwrap();
        assert!((r2 - 0.028824).abs() < 1e-6, "r2 = {r2}");
    }

    #[test]
    fn ratio_undefined_on_nonpositive_denominator() {
        let at = ts("2019-06-28T16:43:10Z");
        let mut snap = snapshot_at("2019-06-28T16:43:10Z");
        snap.record(GasSpecies::C2H4, MeasurementKind::Concentration, 68.0, at);
        snap.record(GasSpecies::C2H6, MeasurementKind::Concentration, 0.0, at);
        let report = compute_ratios(&snap);
        assert_eq!(
            report.r5,
            RatioValue::Undefined {
                undefined: RatioUndefined::NonpositiveDenominator
            }
        );
        // C2H2 channel absent entirely
        assert_eq!(
            report.r2,
            RatioValue::Undefined {
                undefined: RatioUndefined::MissingNumerator
            }
        );
    }

    #[test]
    fn ratio_undefined_on_negative_denominator() {
        let at = ts("2019-06-28T16:43:10Z");
        let mut snap = snapshot_at("2019-06-28T16:43:10Z");
        snap.record(GasSpecies::CH4, MeasurementKind::Concentration, 40.0, at);
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, -48.9, at);
        let report = compute_ratios(&snap);
        assert_eq!(
            report.r1,
            RatioValue::Undefined {
                undefined: RatioUndefined::NonpositiveDenominator
            }
        );
    }

    #[test]
    fn stale_entries_are_excluded() {
        let mut snap = snapshot_at("2019-01-25T10:14:00Z");
        // 49 hours old, beyond the 48 h default
        snap.record(
            GasSpecies::H2,
            MeasurementKind::Concentration,
            100.0,
            ts("2019-01-23T09:14:00Z"),
        );
        assert!(snap.fresh(GasSpecies::H2, MeasurementKind::Concentration).is_none());
        assert!(matches!(
            snap.channel(GasSpecies::H2, MeasurementKind::Concentration),
            ChannelState::Stale(_)
        ));
    }

    #[test]
    fn tdcg_sum_and_missing_list() {
        let at = ts("2019-01-25T10:14:00Z");
        let mut snap = snapshot_at("2019-01-25T10:14:00Z");
        let values = [
            (GasSpecies::H2, 100.0),
            (GasSpecies::CH4, 50.0),
            (GasSpecies::C2H6, 30.0),
            (GasSpecies::C2H4, 20.0),
            (GasSpecies::C2H2, 5.0),
        ];
        for (gas, v) in values {
            snap.record(gas, MeasurementKind::Concentration, v, at);
        }
        assert_eq!(
            compute_tdcg(&snap),
            TdcgResult::Unavailable {
                unavailable: vec![GasSpecies::CO]
            }
        );
        snap.record(GasSpecies::CO, MeasurementKind::Concentration, 300.0, at);
        assert_eq!(compute_tdcg(&snap), TdcgResult::Available { value: 505.0 });
    }

    #[test]
    fn tdcg_zero_sum() {
        let at = ts("2019-01-25T10:14:00Z");
        let mut snap = snapshot_at("2019-01-25T10:14:00Z");
        for gas in GasSpecies::ALL {
            snap.record(gas, MeasurementKind::Concentration, 0.0, at);
        }
        assert_eq!(compute_tdcg(&snap), TdcgResult::Available { value: 0.0 });
    }

    #[test]
    fn estimate_rate_exact_on_linear_ramp() {
        let t0 = ts("2019-01-24T00:00:00Z");
        let series = vec![
            (t0, 0.0),
            (t0 + Duration::hours(12), 5.0),
            (t0 + Duration::hours(24), 10.0),
        ];
        let rate = estimate_rate(&series, Duration::hours(24), t0 + Duration::hours(24)).unwrap();
        assert!((rate - 10.0).abs() < 1e-9, "rate = {rate}");
    }

    #[test]
    fn estimate_rate_zero_on_constant_series() {
        let t0 = ts("2019-01-24T00:00:00Z");
        let series = vec![(t0, 7.5), (t0 + Duration::hours(3), 7.5), (t0 + Duration::hours(9), 7.5)];
        let rate = estimate_rate(&series, Duration::hours(24), t0 + Duration::hours(9)).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn estimate_rate_errors() {
        let t0 = ts("2019-01-24T00:00:00Z");
        assert_eq!(
            estimate_rate(&[(t0, 1.0)], Duration::hours(24), t0),
            Err(RateError::InsufficientData(1))
        );
        assert_eq!(
            estimate_rate(&[(t0, 1.0), (t0, 2.0)], Duration::hours(24), t0),
            Err(RateError::DegenerateTime)
        );
        // points exist but none inside the window
        let series = vec![(t0, 1.0), (t0 + Duration::hours(1), 2.0)];
        assert_eq!(
            estimate_rate(&series, Duration::hours(2), t0 + Duration::hours(48)),
            Err(RateError::InsufficientData(0))
        );
    }

    #[test]
    fn analyze_failure_case_final_row() {
        let cfg = default_thresholds();
        let at = ts("2019-01-25T10:14:00Z");
        let mut snap = snapshot_at("2019-01-25T10:14:00Z");
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, 334.0, at);
        snap.record(GasSpecies::H2, MeasurementKind::Trend, 228.0, at);
        let result = analyze(&snap, &GasHistory::new(), &cfg).unwrap();
        let h2 = result.assessment(GasSpecies::H2).unwrap();
        assert_eq!(h2.conc_band, Band::B2);
        assert_eq!(h2.trend_band, Band::B4);
        assert_eq!(h2.severity, Severity::Warning);
        assert_eq!(h2.trend.unwrap().source, TrendSource::Reported);
    }

    #[test]
    fn analyze_failure_case_first_row_typical() {
        let cfg = default_thresholds();
        let at = ts("2019-01-24T00:00:00Z");
        let mut snap = snapshot_at("2019-01-24T00:00:00Z");
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, 2.0, at);
        snap.record(GasSpecies::H2, MeasurementKind::Trend, 0.0, at);
        let result = analyze(&snap, &GasHistory::new(), &cfg).unwrap();
        let h2 = result.assessment(GasSpecies::H2).unwrap();
        assert_eq!((h2.conc_band, h2.trend_band), (Band::B1, Band::B1));
        assert_eq!(h2.severity, Severity::Typical);
    }

    #[test]
    fn analyze_rejects_snapshot_without_key_gas() {
        let cfg = default_thresholds();
        let at = ts("2019-01-24T00:00:00Z");
        let mut snap = snapshot_at("2019-01-24T00:00:00Z");
        snap.record(GasSpecies::CH4, MeasurementKind::Concentration, 40.0, at);
        assert_eq!(
            analyze(&snap, &GasHistory::new(), &cfg),
            Err(AnalyzeError::EmptySnapshot("TX-1C".into()))
        );
    }

    #[test]
    fn analyze_estimates_trend_from_history_when_channel_missing() {
        let cfg = default_thresholds();
        let at = ts("2019-01-25T00:00:00Z");
        let mut snap = snapshot_at("2019-01-25T00:00:00Z");
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, 100.0, at);
        let mut history = GasHistory::new();
        // 12 ppm/day ramp: between trend L1 (8.33) and L2 (16.66)
        history.push(GasSpecies::H2, at - Duration::hours(24), 88.0);
        history.push(GasSpecies::H2, at - Duration::hours(12), 94.0);
        history.push(GasSpecies::H2, at, 100.0);
        let result = analyze(&snap, &history, &cfg).unwrap();
        let h2 = result.assessment(GasSpecies::H2).unwrap();
        let trend = h2.trend.unwrap();
        assert_eq!(trend.source, TrendSource::Estimated);
        assert!((trend.value - 12.0).abs() < 1e-9);
        assert_eq!(h2.trend_band, Band::B2);
        assert_eq!(h2.severity, Severity::Atypical);
    }

    #[test]
    fn analyze_degrades_to_band_one_without_trend() {
        let cfg = default_thresholds();
        let at = ts("2019-01-25T00:00:00Z");
        let mut snap = snapshot_at("2019-01-25T00:00:00Z");
        snap.record(GasSpecies::H2, MeasurementKind::Concentration, 400.0, at);
        let result = analyze(&snap, &GasHistory::new(), &cfg).unwrap();
        let h2 = result.assessment(GasSpecies::H2).unwrap();
        assert!(h2.trend.is_none());
        assert_eq!(h2.trend_band, Band::B1);
        assert_eq!(h2.severity, Severity::Atypical); // matrix[2][1]
    }

    #[test]
    fn analyze_is_deterministic() {
        let cfg = default_thresholds();
        let at = ts("2019-01-25T10:14:00Z");
        let mut snap = snapshot_at("2019-01-25T10:14:00Z");
        for gas in GasSpecies::ALL {
            snap.record(gas, MeasurementKind::Concentration, 12.5, at);
        }
        snap.record(GasSpecies::H2, MeasurementKind::Trend, 3.0, at);
        let history = GasHistory::new();
        let a = analyze(&snap, &history, &cfg).unwrap();
        let b = analyze(&snap, &history, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
