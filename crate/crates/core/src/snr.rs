//! Instantaneous SNR samples from a sweep.
//!
//! Each frequency point maps to one linear-SNR sample
//! `gamma_i = |s21_i|^2 P_tx / (B N0)` with every power in linear watts.
//! The transform is deterministic: the additive-noise assumption enters only
//! through the `B N0` normalization, no noise is drawn.

use crate::sweep::{ScenarioMeta, SweepError};
use crate::sweep::Sweep;
use std::fmt;

/// Magic first line of the SNR sample text format.
const MAGIC: &str = "#snr v1";

/// Noise normalization: one-sided noise density and the bandwidth it
/// occupies.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    /// Noise power spectral density in dBm/Hz.
    pub n0_dbm_per_hz: f64,
    /// Occupied bandwidth in Hz, > 0.
    pub bandwidth_hz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            n0_dbm_per_hz: -174.0,
            bandwidth_hz: 60e9,
        }
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<(), SnrError> {
        if !self.n0_dbm_per_hz.is_finite() {
            return Err(SnrError::InvalidNoise(format!(
                "n0_dbm_per_hz must be finite, got {}",
                self.n0_dbm_per_hz
            )));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(SnrError::InvalidNoise(format!(
                "bandwidth_hz must be > 0, got {}",
                self.bandwidth_hz
            )));
        }
        Ok(())
    }

    /// Total in-band noise power `B N0` in dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.n0_dbm_per_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Total in-band noise power in watts.
    pub fn noise_floor_w(&self) -> f64 {
        dbm_to_watts(self.noise_floor_dbm())
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Positive linear-SNR samples from one sweep, with the scenario and noise
/// constants that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSampleSet {
    samples: Vec<f64>,
    meta: ScenarioMeta,
    noise: NoiseConfig,
    dropped: usize,
}

impl SnrSampleSet {
    /// Validates and assembles a sample set: every sample finite and > 0.
    pub fn new(
        samples: Vec<f64>,
        meta: ScenarioMeta,
        noise: NoiseConfig,
        dropped: usize,
    ) -> Result<Self, SnrError> {
        noise.validate()?;
        if samples.is_empty() {
            return Err(SnrError::EmptyResult);
        }
        for (i, &s) in samples.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(SnrError::NonFiniteSample { index: i });
            }
        }
        Ok(Self {
            samples,
            meta,
            noise,
            dropped,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn meta(&self) -> &ScenarioMeta {
        &self.meta
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    /// Number of frequency points discarded for having zero magnitude.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one sample
    }
}

/// Errors from SNR derivation and (de)serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum SnrError {
    /// Every frequency point was dropped; no samples remain.
    EmptyResult,
    /// A sample is zero, negative, or non-finite at `index` (0-based).
    NonFiniteSample { index: usize },
    /// Noise configuration violates its domain.
    InvalidNoise(String),
    /// Serialized header line is missing or malformed (1-based line).
    MalformedHeader { line: usize },
    /// Serialized sample line failed to parse (1-based line).
    MalformedValue { line: usize },
    /// Scenario metadata failed validation.
    Meta(SweepError),
}

impl fmt::Display for SnrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyResult => write!(f, "all frequency points were dropped; no SNR samples"),
            Self::NonFiniteSample { index } => {
                write!(f, "sample at index {index} is not finite and positive")
            }
            Self::InvalidNoise(msg) => write!(f, "invalid noise config: {msg}"),
            Self::MalformedHeader { line } => write!(f, "malformed header at line {line}"),
            Self::MalformedValue { line } => write!(f, "malformed value at line {line}"),
            Self::Meta(e) => write!(f, "invalid scenario metadata: {e}"),
        }
    }
}

impl std::error::Error for SnrError {}

impl From<SweepError> for SnrError {
    fn from(e: SweepError) -> Self {
        Self::Meta(e)
    }
}

/// Converts a sweep into instantaneous-SNR samples.
///
/// The transmit power comes from the sweep's metadata. Zero-magnitude
/// points are dropped and counted; any point whose SNR fails to be finite
/// and positive for another reason is an error, not a silent drop.
///
/// # Errors
///
/// [`SnrError::EmptyResult`] when every point is dropped;
/// [`SnrError::NonFiniteSample`] on overflow;
/// [`SnrError::InvalidNoise`] for a bad noise config.
pub fn snr_samples(sweep: &Sweep, noise: &NoiseConfig) -> Result<SnrSampleSet, SnrError> {
    noise.validate()?;
    let scale = dbm_to_watts(sweep.meta().p_tx_dbm) / noise.noise_floor_w();
    let mut samples = Vec::with_capacity(sweep.len());
    let mut dropped = 0usize;
    for (i, s) in sweep.s21().iter().enumerate() {
        let p = s.norm_sqr();
        if p == 0.0 {
            dropped += 1;
            continue;
        }
        let gamma = p * scale;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(SnrError::NonFiniteSample { index: i });
        }
        samples.push(gamma);
    }
    if samples.is_empty() {
        return Err(SnrError::EmptyResult);
    }
    Ok(SnrSampleSet {
        samples,
        meta: sweep.meta().clone(),
        noise: *noise,
        dropped,
    })
}

/// Serializes a sample set: `#key value` headers, then one sample per line.
pub fn write_snr_samples(set: &SnrSampleSet) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let m = set.meta();
    out.push_str(&format!("#distance_m {}\n", m.distance_m));
    out.push_str(&format!("#angle_deg {}\n", m.angle_deg));
    out.push_str(&format!("#p_tx_dbm {}\n", m.p_tx_dbm));
    out.push_str(&format!("#label {}\n", m.label));
    out.push_str(&format!("#n0_dbm_per_hz {}\n", set.noise().n0_dbm_per_hz));
    out.push_str(&format!("#bandwidth_hz {}\n", set.noise().bandwidth_hz));
    out.push_str(&format!("#dropped {}\n", set.dropped()));
    for s in set.samples() {
        out.push_str(&format!("{s}\n"));
    }
    out
}

/// Parses the text produced by [`write_snr_samples`].
///
/// # Errors
///
/// [`SnrError::MalformedHeader`] / [`SnrError::MalformedValue`] with the
/// 1-based line; [`SnrError::NonFiniteSample`] for out-of-domain samples.
pub fn parse_snr_samples(text: &str) -> Result<SnrSampleSet, SnrError> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    if lines.next() != Some(MAGIC) {
        return Err(SnrError::MalformedHeader { line: 1 });
    }
    let mut line_no = 1usize;
    let mut take = |key: &str| -> Result<String, SnrError> {
        line_no += 1;
        let line = lines.next().ok_or(SnrError::MalformedHeader { line: 0 })?;
        let rest = line
            .strip_prefix('#')
            .and_then(|r| r.strip_prefix(key))
            .ok_or(SnrError::MalformedHeader { line: line_no })?;
        match rest.strip_prefix(' ') {
            Some(v) => Ok(v.to_string()),
            None if rest.is_empty() => Ok(String::new()),
            None => Err(SnrError::MalformedHeader { line: line_no }),
        }
    };
    let parse = |v: &str, line: usize| -> Result<f64, SnrError> {
        v.parse().map_err(|_| SnrError::MalformedValue { line })
    };
    let distance = parse(&take("distance_m")?, 2)?;
    let angle = parse(&take("angle_deg")?, 3)?;
    let p_tx = parse(&take("p_tx_dbm")?, 4)?;
    let label = take("label")?;
    let n0 = parse(&take("n0_dbm_per_hz")?, 6)?;
    let bw = parse(&take("bandwidth_hz")?, 7)?;
    let dropped: usize = take("dropped")?
        .parse()
        .map_err(|_| SnrError::MalformedValue { line: 8 })?;
    let meta = ScenarioMeta::new(distance, angle, p_tx, &label)?;
    let noise = NoiseConfig {
        n0_dbm_per_hz: n0,
        bandwidth_hz: bw,
    };
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate().skip(8) {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| SnrError::MalformedValue { line: i + 1 })?;
        samples.push(v);
    }
    SnrSampleSet::new(samples, meta, noise, dropped)
}
