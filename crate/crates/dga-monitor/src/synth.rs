//! Synthetic measurement generator: a quiet baseline profile and a
//! ramp-to-failure profile that replays the historical failure-case
//! timeline.
//!
//! The ramp profile interpolates monotonically between its anchor
//! readings but defers every upward band crossing to the anchor instant
//! itself, so replaying the generated file produces events exactly at the
//! anchors and nowhere in between.

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{GasLimits, GasSpecies, MeasurementKind, Sample, ThresholdConfig};

/// Default sampling cadence.
pub const DEFAULT_CADENCE_MINS: i64 = 15;

/// Keeps interpolated filler strictly below the band limit it would
/// otherwise cross early.
const RAMP_MARGIN: f64 = 0.01;

/// One observed (concentration, trend) reading the ramp profile must pass
/// through exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub at: DateTime<Utc>,
    pub concentration: f64,
    pub trend: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Stable,
    RampFailure,
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthProfile {
    pub kind: ProfileKind,
    pub transformer_id: String,
    pub cadence: Duration,
    /// Quiet-profile span (ramp spans are defined by the anchors).
    pub start: DateTime<Utc>,
    pub duration: Duration,
    /// Baseline concentration per gas, all inside band 1.
    pub baselines: [(GasSpecies, f64); 6],
    /// The gas that ramps; the rest stay at baseline.
    pub ramp_gas: GasSpecies,
    pub anchors: Vec<Anchor>,
}

fn default_start() -> DateTime<Utc> {
    "2019-01-24T00:00:00Z".parse().expect("valid timestamp")
}

const DEFAULT_BASELINES: [(GasSpecies, f64); 6] = [
    (GasSpecies::H2, 10.0),
    (GasSpecies::CH4, 25.0),
    (GasSpecies::C2H6, 15.0),
    (GasSpecies::C2H4, 5.0),
    (GasSpecies::C2H2, 0.5),
    (GasSpecies::CO, 120.0),
];

impl SynthProfile {
    /// Quiet fleet profile: every gas stays inside band 1.
    pub fn stable(duration: Duration) -> Self {
        SynthProfile {
            kind: ProfileKind::Stable,
            transformer_id: "TX-1C".into(),
            cadence: Duration::minutes(DEFAULT_CADENCE_MINS),
            start: default_start(),
            duration,
            baselines: DEFAULT_BASELINES,
            ramp_gas: GasSpecies::H2,
            anchors: Vec::new(),
        }
    }

    /// The historical failure case: H2 concentration and trend ramp
    /// through the four anchor readings over roughly 34 hours.
    pub fn ramp_failure() -> Self {
        let anchor = |at: &str, concentration: f64, trend: f64| Anchor {
            at: at.parse().expect("valid timestamp"),
            concentration,
            trend,
        };
        SynthProfile {
            kind: ProfileKind::RampFailure,
            transformer_id: "TX-1C".into(),
            cadence: Duration::minutes(DEFAULT_CADENCE_MINS),
            start: default_start(),
            duration: Duration::hours(34),
            baselines: DEFAULT_BASELINES,
            ramp_gas: GasSpecies::H2,
            anchors: vec![
                anchor("2019-01-24T00:00:00Z", 2.0, 0.0),
                anchor("2019-01-24T08:02:00Z", 60.0, 16.0),
                anchor("2019-01-24T10:55:00Z", 85.0, 31.0),
                anchor("2019-01-25T10:14:00Z", 334.0, 228.0),
            ],
        }
    }

    fn timestamps(&self) -> Vec<DateTime<Utc>> {
        let mut out = Vec::new();
        match self.kind {
            ProfileKind::Stable => {
                let mut t = self.start;
                let end = self.start + self.duration;
                while t <= end {
                    out.push(t);
                    t += self.cadence;
                }
            }
            ProfileKind::RampFailure => {
                for pair in self.anchors.windows(2) {
                    let mut t = pair[0].at;
                    while t < pair[1].at {
                        out.push(t);
                        t += self.cadence;
                    }
                }
                if let Some(last) = self.anchors.last() {
                    out.push(last.at);
                }
            }
        }
        out
    }
}

/// Linear filler between two readings, with any upward band crossing
/// deferred to the segment's end anchor.
fn ramp_value(
    from: &(DateTime<Utc>, f64),
    to: &(DateTime<Utc>, f64),
    at: DateTime<Utc>,
    limits: &[f64; 3],
) -> f64 {
    let (t0, v0) = *from;
    let (t1, v1) = *to;
    if at >= t1 {
        return v1;
    }
    if at <= t0 || t1 <= t0 {
        return v0;
    }
    let mut target = v1;
    if v1 > v0 {
        if let Some(limit) = limits.iter().copied().find(|l| *l > v0 && v1 >= *l) {
            target = (limit - RAMP_MARGIN).max(v0).min(v1);
        }
    }
    let frac = (at - t0).num_seconds() as f64 / (t1 - t0).num_seconds() as f64;
    v0 + (target - v0) * frac
}

fn anchor_segment(anchors: &[Anchor], at: DateTime<Utc>) -> (&Anchor, &Anchor) {
    debug_assert!(!anchors.is_empty());
    let mut from = &anchors[0];
    for anchor in anchors {
        if anchor.at <= at {
            from = anchor;
        } else {
            return (from, anchor);
        }
    }
    (from, anchors.last().expect("non-empty anchors"))
}

/// Generates the sample stream for a profile. Deterministic under a
/// fixed seed; ramp anchors are reproduced exactly.
pub fn generate(profile: &SynthProfile, seed: u64, cfg: &ThresholdConfig) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let no_limits = GasLimits {
        concentration: [f64::MAX / 4.0, f64::MAX / 2.0, f64::MAX],
        trend: [f64::MAX / 4.0, f64::MAX / 2.0, f64::MAX],
    };

    let push = |samples: &mut Vec<Sample>, t, gas, kind, value| {
        samples.push(
            Sample::new(t, profile.transformer_id.clone(), gas, kind, value)
                .expect("generated sample is valid"),
        );
    };

    for t in profile.timestamps() {
        for (gas, baseline) in profile.baselines {
            let ramping = profile.kind == ProfileKind::RampFailure
                && gas == profile.ramp_gas
                && !profile.anchors.is_empty();
            if ramping {
                let limits = cfg.limits_for(gas).unwrap_or(&no_limits);
                let (from, to) = anchor_segment(&profile.anchors, t);
                let conc = ramp_value(
                    &(from.at, from.concentration),
                    &(to.at, to.concentration),
                    t,
                    &limits.concentration,
                );
                let trend = ramp_value(&(from.at, from.trend), &(to.at, to.trend), t, &limits.trend);
                push(&mut samples, t, gas, MeasurementKind::Concentration, conc);
                push(&mut samples, t, gas, MeasurementKind::Trend, trend);
            } else {
                // Baseline with a +/-2% wiggle, clamped well inside band 1.
                let wiggle: f64 = rng.gen_range(-0.02..0.02);
                let conc = baseline * (1.0 + wiggle);
                push(&mut samples, t, gas, MeasurementKind::Concentration, conc);
                if gas.is_key_gas() {
                    let drift: f64 = rng.gen_range(-0.05..0.05);
                    push(&mut samples, t, gas, MeasurementKind::Trend, drift);
                }
            }
        }
    }
    samples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    samples
}

/// Writes samples in the ingest CSV schema.
pub fn write_csv<W: std::io::Write>(samples: &[Sample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "timestamp,transformer_id,species,kind,value")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.timestamp
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            s.transformer_id,
            s.species,
            s.kind,
            s.value
        )?;
    }
    Ok(())
}
