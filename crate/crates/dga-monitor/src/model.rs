//! Domain types shared by every other module: gas species, measurement
//! samples, multi-level threshold configuration and the severity grading
//! scale.
//!
//! All types here are plain immutable values; once constructed they can be
//! cloned and shared across threads freely.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six combustible gases tracked by the monitor.
///
/// Declaration order doubles as the canonical sort/report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GasSpecies {
    H2,
    CH4,
    C2H6,
    C2H4,
    C2H2,
    CO,
}

impl GasSpecies {
    /// Every tracked species, in canonical order.
    pub const ALL: [GasSpecies; 6] = [
        GasSpecies::H2,
        GasSpecies::CH4,
        GasSpecies::C2H6,
        GasSpecies::C2H4,
        GasSpecies::C2H2,
        GasSpecies::CO,
    ];

    /// The key-gas subset used for event thresholds.
    pub const KEY_GASES: [GasSpecies; 3] = [GasSpecies::C2H2, GasSpecies::C2H4, GasSpecies::H2];

    pub fn name(&self) -> &'static str {
        match self {
            GasSpecies::H2 => "H2",
            GasSpecies::CH4 => "CH4",
            GasSpecies::C2H6 => "C2H6",
            GasSpecies::C2H4 => "C2H4",
            GasSpecies::C2H2 => "C2H2",
            GasSpecies::CO => "CO",
        }
    }

    /// True for the gases that drive event generation.
    pub fn is_key_gas(&self) -> bool {
        Self::KEY_GASES.contains(self)
    }
}

impl fmt::Display for GasSpecies {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown gas species: {0:?}")]
pub struct UnknownSpecies(pub String);

impl FromStr for GasSpecies {
    type Err = UnknownSpecies;

    /// Case-insensitive match on the canonical names; no aliases.
    fn from_str(token: &str) -> Result<Self, Self::Err> {
        GasSpecies::ALL
            .iter()
            .copied()
            .find(|g| g.name().eq_ignore_ascii_case(token))
            .ok_or_else(|| UnknownSpecies(token.to_string()))
    }
}

/// Parses a gas-species token (case-insensitive canonical name).
pub fn parse_species(token: &str) -> Result<GasSpecies, UnknownSpecies> {
    token.parse()
}

/// What a sample measures: a concentration in ppm, or a concentration
/// trend in ppm/day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    Concentration,
    Trend,
}

impl MeasurementKind {
    pub fn name(&self) -> &'static str {
        match self {
            MeasurementKind::Concentration => "concentration",
            MeasurementKind::Trend => "trend",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            MeasurementKind::Concentration => "ppm",
            MeasurementKind::Trend => "ppm/day",
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown measurement kind: {0:?} (expected \"concentration\" or \"trend\")")]
pub struct UnknownKind(pub String);

impl FromStr for MeasurementKind {
    type Err = UnknownKind;

    fn from_str(token: &str) -> Result<Self, Self::Err> {
        if token.eq_ignore_ascii_case("concentration") {
            Ok(MeasurementKind::Concentration)
        } else if token.eq_ignore_ascii_case("trend") {
            Ok(MeasurementKind::Trend)
        } else {
            Err(UnknownKind(token.to_string()))
        }
    }
}

/// Data quality flag attached at ingestion time.
///
/// Negative concentrations are kept (on-line samplers do report them) but
/// marked suspect so downstream consumers can tell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Normal,
    Suspect,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("transformer_id must be non-empty")]
    EmptyTransformerId,
    #[error("value must be finite, got {0}")]
    NonFiniteValue(f64),
}

/// One timestamped measurement of one channel for one transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: DateTime<Utc>,
    pub transformer_id: String,
    pub species: GasSpecies,
    pub kind: MeasurementKind,
    pub value: f64,
    pub quality: Quality,
}

impl Sample {
    /// Builds a sample, rejecting non-finite values and empty transformer
    /// ids. Timestamps are truncated to whole seconds. Negative
    /// concentrations are accepted but flagged [`Quality::Suspect`].
    pub fn new(
        timestamp: DateTime<Utc>,
        transformer_id: impl Into<String>,
        species: GasSpecies,
        kind: MeasurementKind,
        value: f64,
    ) -> Result<Self, SampleError> {
        let transformer_id = transformer_id.into();
        if transformer_id.is_empty() {
            return Err(SampleError::EmptyTransformerId);
        }
        if !value.is_finite() {
            return Err(SampleError::NonFiniteValue(value));
        }
        let quality = if kind == MeasurementKind::Concentration && value < 0.0 {
            Quality::Suspect
        } else {
            Quality::Normal
        };
        Ok(Sample {
            timestamp: truncate_to_seconds(timestamp),
            transformer_id,
            species,
            kind,
            value,
            quality,
        })
    }

    /// Canonical ordering key: (timestamp, transformer, species, kind,
    /// value). Including the value makes batch ordering independent of the
    /// input line order even for conflicting duplicates.
    pub fn sort_key(&self) -> impl Ord + '_ {
        (
            self.timestamp,
            self.transformer_id.as_str(),
            self.species,
            self.kind,
            FloatOrd(self.value),
        )
    }
}

/// Total-order wrapper so f64 can participate in sort keys.
#[derive(PartialEq)]
pub(crate) struct FloatOrd(pub f64);

impl Eq for FloatOrd {}

impl PartialOrd for FloatOrd {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FloatOrd {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn truncate_to_seconds(ts: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::<Utc>::from_timestamp(ts.timestamp(), 0).expect("timestamp in range")
}

/// Fault severity, ordered from benign to critical.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    #[default]
    Typical,
    Atypical,
    Caution,
    Warning,
    Alarm,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Typical,
        Severity::Atypical,
        Severity::Caution,
        Severity::Warning,
        Severity::Alarm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Severity::Typical => "typical",
            Severity::Atypical => "atypical",
            Severity::Caution => "caution",
            Severity::Warning => "warning",
            Severity::Alarm => "alarm",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown severity: {0:?}")]
pub struct UnknownSeverity(pub String);

impl FromStr for Severity {
    type Err = UnknownSeverity;

    fn from_str(token: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .iter()
            .copied()
            .find(|s| s.name().eq_ignore_ascii_case(token))
            .ok_or_else(|| UnknownSeverity(token.to_string()))
    }
}

/// One of the four intervals induced by a three-limit table:
/// 1 = below L1, 2 = [L1, L2), 3 = [L2, L3), 4 = at or above L3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Band(u8);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("band index must be in 1..=4, got {0}")]
pub struct InvalidBand(pub u8);

impl Band {
    pub const B1: Band = Band(1);
    pub const B2: Band = Band(2);
    pub const B3: Band = Band(3);
    pub const B4: Band = Band(4);

    pub fn new(index: u8) -> Result<Self, InvalidBand> {
        if (1..=4).contains(&index) {
            Ok(Band(index))
        } else {
            Err(InvalidBand(index))
        }
    }

    /// 1-based index as printed in reports and the severity table.
    pub fn index(&self) -> u8 {
        self.0
    }

    /// 0-based offset into a 4-element array.
    pub(crate) fn offset(&self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u8> for Band {
    type Error = InvalidBand;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Band::new(v)
    }
}

impl From<Band> for u8 {
    fn from(b: Band) -> u8 {
        b.0
    }
}

/// The 4x4 severity-of-fault table: rows indexed by concentration band,
/// columns by trend band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityMatrix(pub [[Severity; 4]; 4]);

impl SeverityMatrix {
    pub fn lookup(&self, conc_band: Band, trend_band: Band) -> Severity {
        self.0[conc_band.offset()][trend_band.offset()]
    }
}

/// Three ascending limits for one gas: concentration in ppm, trend in
/// ppm/day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasLimits {
    pub concentration: [f64; 3],
    pub trend: [f64; 3],
}

/// Per-key-gas limit tables. The fleet uses one table per gas; only the
/// key gases carry limits. Each gas omitted from a config file keeps its
/// fleet default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyGasLimits {
    #[serde(rename = "C2H2", default = "default_c2h2_limits")]
    pub c2h2: GasLimits,
    #[serde(rename = "C2H4", default = "default_c2h4_limits")]
    pub c2h4: GasLimits,
    #[serde(rename = "H2", default = "default_h2_limits")]
    pub h2: GasLimits,
}

fn default_c2h2_limits() -> GasLimits {
    GasLimits {
        concentration: [3.33, 6.66, 10.0],
        trend: [1.66, 3.33, 5.0],
    }
}

fn default_c2h4_limits() -> GasLimits {
    GasLimits {
        concentration: [66.6, 133.33, 200.0],
        trend: [3.33, 6.66, 10.0],
    }
}

fn default_h2_limits() -> GasLimits {
    GasLimits {
        concentration: [333.3, 666.6, 1000.0],
        trend: [8.33, 16.66, 25.0],
    }
}

impl KeyGasLimits {
    pub fn get(&self, gas: GasSpecies) -> Option<&GasLimits> {
        match gas {
            GasSpecies::C2H2 => Some(&self.c2h2),
            GasSpecies::C2H4 => Some(&self.c2h4),
            GasSpecies::H2 => Some(&self.h2),
            _ => None,
        }
    }
}

/// Threshold configuration: per-gas limit tables, the severity matrix and
/// the engine/estimator timing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub matrix: SeverityMatrix,
    /// Look-back window for trend estimation, seconds.
    pub trend_window_secs: u64,
    /// How long severity must stay below the last emitted level before the
    /// event engine re-arms, seconds.
    pub rearm_period_secs: u64,
    pub limits: KeyGasLimits,
}

impl ThresholdConfig {
    pub fn trend_window(&self) -> Duration {
        Duration::seconds(self.trend_window_secs as i64)
    }

    pub fn rearm_period(&self) -> Duration {
        Duration::seconds(self.rearm_period_secs as i64)
    }

    pub fn limits_for(&self, gas: GasSpecies) -> Option<&GasLimits> {
        self.limits.get(gas)
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        default_thresholds()
    }
}

/// The fleet-wide default thresholds: three concentration and three trend
/// limits per key gas plus the severity-of-fault matrix.
pub fn default_thresholds() -> ThresholdConfig {
    use Severity::{Alarm, Atypical, Caution, Typical, Warning};
    ThresholdConfig {
        limits: KeyGasLimits {
            c2h2: default_c2h2_limits(),
            c2h4: default_c2h4_limits(),
            h2: default_h2_limits(),
        },
        matrix: SeverityMatrix([
            [Typical, Atypical, Caution, Warning],
            [Atypical, Caution, Warning, Warning],
            [Caution, Caution, Warning, Alarm],
            [Caution, Warning, Alarm, Alarm],
        ]),
        trend_window_secs: 24 * 3600,
        rearm_period_secs: 24 * 3600,
    }
}

/// One threshold-configuration defect found by [`validate_config`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    /// Where the defect is, e.g. `limits.H2.concentration` or `matrix`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Checks every threshold-configuration invariant and returns all
/// violations found, not just the first.
pub fn validate_config(cfg: &ThresholdConfig) -> Vec<ConfigViolation> {
    let mut violations = Vec::new();

    for gas in GasSpecies::KEY_GASES {
        let limits = cfg.limits_for(gas).expect("key gas has limits");
        check_limits(&mut violations, gas, "concentration", &limits.concentration);
        check_limits(&mut violations, gas, "trend", &limits.trend);
    }

    let m = &cfg.matrix.0;
    for i in 0..4 {
        for j in 0..4 {
            if j + 1 < 4 && m[i][j] > m[i][j + 1] {
                violations.push(ConfigViolation {
                    location: "matrix".into(),
                    message: format!(
                        "row monotonicity fails at [{}][{}]: {} > {}",
                        i + 1,
                        j + 1,
                        m[i][j],
                        m[i][j + 1]
                    ),
                });
            }
            if i + 1 < 4 && m[i][j] > m[i + 1][j] {
                violations.push(ConfigViolation {
                    location: "matrix".into(),
                    message: format!(
                        "column monotonicity fails at [{}][{}]: {} > {}",
                        i + 1,
                        j + 1,
                        m[i][j],
                        m[i + 1][j]
                    ),
                });
            }
        }
    }

    if cfg.trend_window_secs == 0 {
        violations.push(ConfigViolation {
            location: "trend_window_secs".into(),
            message: "must be positive".into(),
        });
    }
    if cfg.rearm_period_secs == 0 {
        violations.push(ConfigViolation {
            location: "rearm_period_secs".into(),
            message: "must be positive".into(),
        });
    }

    violations
}

fn check_limits(out: &mut Vec<ConfigViolation>, gas: GasSpecies, table: &str, limits: &[f64; 3]) {
    let location = format!("limits.{gas}.{table}");
    for v in limits {
        if !v.is_finite() {
            out.push(ConfigViolation {
                location: location.clone(),
                message: format!("limit {v} is not finite"),
            });
            return;
        }
    }
    if limits[0] <= 0.0 {
        out.push(ConfigViolation {
            location: location.clone(),
            message: format!("0 < L1 fails: L1 = {}", limits[0]),
        });
    }
    if limits[0] >= limits[1] {
        out.push(ConfigViolation {
            location: location.clone(),
            message: format!("L1 < L2 fails: {} >= {}", limits[0], limits[1]),
        });
    }
    if limits[1] >= limits[2] {
        out.push(ConfigViolation {
            location,
            message: format!("L2 < L3 fails: {} >= {}", limits[1], limits[2]),
        });
    }
}
