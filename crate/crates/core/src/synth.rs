//! Synthetic sweep generation from a parametric link budget, so the full
//! pipeline can run at desk scale without measured data.
//!
//! The received power per frequency point combines an n-scaled free-space
//! path loss, a piecewise-linear molecular absorption term, a deterministic
//! Gaussian-beam misalignment pattern, both antenna gains, a calibration
//! constant, and (optionally) a unit-mean Gamma fading multiplier. The phase
//! is the pure line-of-sight delay ramp, so the impulse response peaks at
//! d/c.

use crate::sweep::{ScenarioMeta, Sweep, SweepError};
use crate::SPEED_OF_LIGHT_M_PER_S;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use std::fmt;

/// Fading shapes at or above this threshold disable fading entirely
/// (the infinite-shape limit of a unit-mean Gamma is the constant 1).
pub const FADING_DISABLED_SHAPE: f64 = 1e9;

/// Large-scale/antenna model of the synthetic link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    /// Path-loss exponent n (> 0); 2 is free space.
    pub path_loss_exponent: f64,
    /// Molecular absorption coefficients as ascending (freq_hz, dB/m)
    /// breakpoints, linearly interpolated. Queries outside the table range
    /// are errors.
    pub absorption_table: Vec<(f64, f64)>,
    /// Antenna half-power beamwidth in degrees (> 0).
    pub hpbw_deg: f64,
    /// Per-antenna boresight gain in dBi, credited for both link ends.
    pub antenna_gain_dbi: f64,
    /// Shape of the unit-mean Gamma fading multiplier (> 0); values at or
    /// above [`FADING_DISABLED_SHAPE`] disable fading.
    pub fading_shape: f64,
    /// Calibration constant absorbing the measurement system's gains and
    /// losses. The shipped default is calibrated so the default model's
    /// 20 cm boresight impulse-response peak sits at -23.77 dB.
    pub system_gain_db: f64,
    /// How many link ends rotate with the misalignment angle: 1 or 2.
    pub rotated_antennas: u8,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            path_loss_exponent: 2.0,
            absorption_table: vec![(240e9, 0.02), (300e9, 0.02)],
            hpbw_deg: 12.0,
            antenna_gain_dbi: 24.8,
            fading_shape: 5.0,
            system_gain_db: DEFAULT_SYSTEM_GAIN_DB,
            rotated_antennas: 2,
        }
    }
}

/// Calibration constant of the default model: places the fading-free
/// 20 cm / 0 degree impulse-response peak of the default grid at -23.77 dB.
pub const DEFAULT_SYSTEM_GAIN_DB: f64 = -6.2862478518514;

impl LinkModel {
    /// Checks all field invariants.
    ///
    /// # Errors
    ///
    /// [`SynthError::InvalidModel`] with the offending field.
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(SynthError::InvalidModel(format!(
                "path_loss_exponent must be > 0, got {}",
                self.path_loss_exponent
            )));
        }
        if self.absorption_table.is_empty() {
            return Err(SynthError::InvalidModel(
                "absorption_table must not be empty".into(),
            ));
        }
        for pair in self.absorption_table.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(SynthError::InvalidModel(
                    "absorption_table frequencies must ascend strictly".into(),
                ));
            }
        }
        for &(f, c) in &self.absorption_table {
            if !(f.is_finite() && f > 0.0 && c.is_finite() && c >= 0.0) {
                return Err(SynthError::InvalidModel(format!(
                    "absorption entry ({f}, {c}) must have positive frequency and coefficient >= 0"
                )));
            }
        }
        if !(self.hpbw_deg.is_finite() && self.hpbw_deg > 0.0) {
            return Err(SynthError::InvalidModel(format!(
                "hpbw_deg must be > 0, got {}",
                self.hpbw_deg
            )));
        }
        if !self.antenna_gain_dbi.is_finite() || !self.system_gain_db.is_finite() {
            return Err(SynthError::InvalidModel(
                "antenna_gain_dbi and system_gain_db must be finite".into(),
            ));
        }
        if !(self.fading_shape.is_finite() && self.fading_shape > 0.0) {
            return Err(SynthError::InvalidModel(format!(
                "fading_shape must be > 0, got {}",
                self.fading_shape
            )));
        }
        if !matches!(self.rotated_antennas, 1 | 2) {
            return Err(SynthError::InvalidModel(format!(
                "rotated_antennas must be 1 or 2, got {}",
                self.rotated_antennas
            )));
        }
        Ok(())
    }

    /// Copy of the model with fading disabled.
    pub fn without_fading(&self) -> Self {
        Self {
            fading_shape: FADING_DISABLED_SHAPE,
            ..self.clone()
        }
    }
}

/// One propagation path: linear amplitude and absolute delay. The synthetic
/// channel is the pure line-of-sight case, a single path at d/c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthPath {
    /// Linear amplitude, >= 0.
    pub amplitude: f64,
    /// Propagation delay in seconds, >= 0.
    pub delay_s: f64,
}

impl SynthPath {
    /// Validates and builds a path.
    pub fn new(amplitude: f64, delay_s: f64) -> Result<Self, SynthError> {
        if !(amplitude.is_finite() && amplitude >= 0.0 && delay_s.is_finite() && delay_s >= 0.0) {
            return Err(SynthError::InvalidModel(format!(
                "path amplitude and delay must be finite and >= 0, got ({amplitude}, {delay_s})"
            )));
        }
        Ok(Self { amplitude, delay_s })
    }

    /// The line-of-sight path for a TX-RX separation: unit reference
    /// amplitude, delay distance/c.
    pub fn line_of_sight(distance_m: f64) -> Result<Self, SynthError> {
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(SynthError::InvalidModel(format!(
                "distance must be > 0, got {distance_m}"
            )));
        }
        Self::new(1.0, distance_m / SPEED_OF_LIGHT_M_PER_S)
    }
}

/// Uniform frequency grid specification for synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            f_start_hz: 240e9,
            f_stop_hz: 300e9,
            n_points: 4096,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if !(self.f_start_hz.is_finite()
            && self.f_stop_hz.is_finite()
            && self.f_start_hz > 0.0
            && self.f_stop_hz > self.f_start_hz)
        {
            return Err(SynthError::InvalidGrid(format!(
                "need 0 < f_start < f_stop, got [{}, {}]",
                self.f_start_hz, self.f_stop_hz
            )));
        }
        if self.n_points < 2 {
            return Err(SynthError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }

    /// Materializes the grid frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        let df = (self.f_stop_hz - self.f_start_hz) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.f_start_hz + i as f64 * df)
            .collect()
    }
}

/// Errors from synthesis.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// A LinkModel or path field violates its domain.
    InvalidModel(String),
    /// Query frequency outside the absorption table's range.
    FrequencyOutOfTable { freq_hz: f64 },
    /// Grid specification violates its domain.
    InvalidGrid(String),
    /// A `#key value` config line failed to parse.
    MalformedConfig { line: usize, reason: String },
    /// Sweep assembly failed (propagated invariant violation).
    Sweep(SweepError),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidModel(msg) => write!(f, "invalid link model: {msg}"),
            Self::FrequencyOutOfTable { freq_hz } => {
                write!(f, "{freq_hz} Hz outside the absorption table range")
            }
            Self::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Self::MalformedConfig { line, reason } => {
                write!(f, "malformed config at line {line}: {reason}")
            }
            Self::Sweep(e) => write!(f, "sweep assembly failed: {e}"),
        }
    }
}

impl std::error::Error for SynthError {}

impl From<SweepError> for SynthError {
    fn from(e: SweepError) -> Self {
        Self::Sweep(e)
    }
}

/// Deterministic large-scale gain in dB (always negative): the n-scaled
/// free-space loss plus molecular absorption,
/// `-(10 n log10(4 pi f d / c) + coeff(f) * d)`.
///
/// # Errors
///
/// [`SynthError::InvalidModel`] for an invalid model or non-positive
/// distance; [`SynthError::FrequencyOutOfTable`] when the absorption table
/// does not cover `freq_hz`.
pub fn path_gain_db(freq_hz: f64, distance_m: f64, model: &LinkModel) -> Result<f64, SynthError> {
    model.validate()?;
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(SynthError::InvalidModel(format!(
            "distance_m must be > 0, got {distance_m}"
        )));
    }
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(SynthError::InvalidModel(format!(
            "freq_hz must be > 0, got {freq_hz}"
        )));
    }
    let spreading = 10.0
        * model.path_loss_exponent
        * (4.0 * std::f64::consts::PI * freq_hz * distance_m / SPEED_OF_LIGHT_M_PER_S).log10();
    let absorption = absorption_coeff_db_per_m(freq_hz, &model.absorption_table)? * distance_m;
    Ok(-(spreading + absorption))
}

fn absorption_coeff_db_per_m(freq_hz: f64, table: &[(f64, f64)]) -> Result<f64, SynthError> {
    let (first, last) = (table[0], table[table.len() - 1]);
    if freq_hz < first.0 || freq_hz > last.0 {
        return Err(SynthError::FrequencyOutOfTable { freq_hz });
    }
    if table.len() == 1 {
        return Ok(first.1);
    }
    let idx = table.partition_point(|&(f, _)| f <= freq_hz).min(table.len() - 1);
    let (f0, c0) = table[idx - 1];
    let (f1, c1) = table[idx];
    Ok(c0 + (c1 - c0) * (freq_hz - f0) / (f1 - f0))
}

/// Deterministic misalignment gain in dB (<= 0): a Gaussian beam pattern of
/// `-3 (2 theta / HPBW)^2` per rotated antenna. Angles are in degrees.
pub fn misalignment_gain_db(angle_deg: f64, model: &LinkModel) -> f64 {
    let per_antenna = -3.0 * (2.0 * angle_deg / model.hpbw_deg).powi(2);
    per_antenna * model.rotated_antennas as f64
}

/// Synthesizes a sweep on `grid` for the scenario in `meta`.
///
/// Per frequency point, `|S21|^2` in dB is the sum of path gain,
/// misalignment gain, both antenna gains, the system calibration constant,
/// and (when enabled) `10 log10 g` with `g` drawn from a unit-mean Gamma of
/// shape `fading_shape`. The phase is the line-of-sight ramp
/// `-2 pi f (d/c)`. Bit-identical output for identical inputs and seed.
///
/// # Errors
///
/// Model, grid, and absorption-range failures as in [`path_gain_db`].
pub fn synth_sweep(
    meta: &ScenarioMeta,
    grid: &GridSpec,
    model: &LinkModel,
    seed: u64,
) -> Result<Sweep, SynthError> {
    model.validate()?;
    grid.validate()?;
    let los = SynthPath::line_of_sight(meta.distance_m)?;
    let fixed_db = misalignment_gain_db(meta.angle_deg, model)
        + 2.0 * model.antenna_gain_dbi
        + model.system_gain_db;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fading = if model.fading_shape < FADING_DISABLED_SHAPE {
        Some(
            rand_distr::Gamma::new(model.fading_shape, 1.0 / model.fading_shape)
                .expect("validated shape"),
        )
    } else {
        None
    };
    let freqs = grid.frequencies();
    let mut s21 = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let mut power_db = path_gain_db(f, meta.distance_m, model)? + fixed_db;
        if let Some(g) = &fading {
            let mult: f64 = g.sample(&mut rng);
            power_db += 10.0 * mult.max(f64::MIN_POSITIVE).log10();
        }
        let mag = los.amplitude * 10f64.powf(power_db / 20.0);
        let phase = -2.0 * std::f64::consts::PI * f * los.delay_s;
        s21.push(Complex64::new(mag * phase.cos(), mag * phase.sin()));
    }
    Ok(Sweep::new(freqs, s21, meta.clone())?)
}

/// Reads LinkModel overrides from `#key value` config text (same line
/// format as sweep headers). Keys not listed keep their defaults; unknown
/// keys are ignored so the model can share a file with pipeline settings.
///
/// The absorption table is written as comma-separated `freq:coeff` pairs,
/// e.g. `#absorption_table 240e9:0.02,300e9:0.05`.
///
/// # Errors
///
/// [`SynthError::MalformedConfig`] with the offending line, or
/// [`SynthError::InvalidModel`] if the assembled model is invalid.
pub fn parse_link_model(text: &str) -> Result<LinkModel, SynthError> {
    let mut model = LinkModel::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim_end();
        if line.is_empty() {
            continue;
        }
        let Some(rest) = line.strip_prefix('#') else {
            return Err(SynthError::MalformedConfig {
                line: line_no,
                reason: "expected `#key value`".into(),
            });
        };
        let Some((key, value)) = rest.split_once(' ') else {
            continue; // bare comment or flag-less key
        };
        let parse_f64 = |v: &str| -> Result<f64, SynthError> {
            v.trim().parse().map_err(|_| SynthError::MalformedConfig {
                line: line_no,
                reason: format!("cannot parse '{v}' as a number"),
            })
        };
        match key {
            "path_loss_exponent" => model.path_loss_exponent = parse_f64(value)?,
            "hpbw_deg" => model.hpbw_deg = parse_f64(value)?,
            "antenna_gain_dbi" => model.antenna_gain_dbi = parse_f64(value)?,
            "fading_shape" => model.fading_shape = parse_f64(value)?,
            "system_gain_db" => model.system_gain_db = parse_f64(value)?,
            "rotated_antennas" => {
                model.rotated_antennas =
                    value.trim().parse().map_err(|_| SynthError::MalformedConfig {
                        line: line_no,
                        reason: format!("cannot parse '{value}' as an antenna count"),
                    })?
            }
            "absorption_table" => {
                let mut table = Vec::new();
                for pair in value.split(',') {
                    let Some((f, c)) = pair.split_once(':') else {
                        return Err(SynthError::MalformedConfig {
                            line: line_no,
                            reason: format!("expected freq:coeff, got '{pair}'"),
                        });
                    };
                    table.push((parse_f64(f)?, parse_f64(c)?));
                }
                model.absorption_table = table;
            }
            _ => {}
        }
    }
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{frequency_response_db, impulse_response, peak_power_db, Window};
    use approx::assert_relative_eq;

    fn no_absorption() -> LinkModel {
        LinkModel {
            absorption_table: vec![(1e9, 0.0), (1e12, 0.0)],
            ..LinkModel::default()
        }
    }

    #[test]
    fn free_space_reference_value() {
        // 20 log10(4 pi f d / c) at f = 300 GHz, d = 1 m, with the exact SI
        // speed of light; frozen from 30-digit evaluation.
        let g = path_gain_db(300e9, 1.0, &no_absorption()).unwrap();
        assert_relative_eq!(g, -81.9902083162766, epsilon = 1e-9);
    }

    #[test]
    fn doubling_distance_costs_six_db_at_n2() {
        let m = no_absorption();
        let g1 = path_gain_db(275e9, 0.5, &m).unwrap();
        let g2 = path_gain_db(275e9, 1.0, &m).unwrap();
        // 20 log10 2, frozen from high-precision evaluation.
        assert_relative_eq!(g1 - g2, 6.02059991327962, epsilon = 1e-9);
    }

    #[test]
    fn absorption_adds_linear_loss() {
        let clean = no_absorption();
        let lossy = LinkModel {
            absorption_table: vec![(1e9, 0.05), (1e12, 0.05)],
            ..LinkModel::default()
        };
        let g0 = path_gain_db(275e9, 1.0, &clean).unwrap();
        let g1 = path_gain_db(275e9, 1.0, &lossy).unwrap();
        assert_relative_eq!(g0 - g1, 0.05, epsilon = 1e-12);

        // Interpolation between breakpoints.
        let sloped = LinkModel {
            absorption_table: vec![(240e9, 0.0), (300e9, 0.06)],
            ..LinkModel::default()
        };
        let mid = path_gain_db(270e9, 2.0, &sloped).unwrap();
        let base = path_gain_db(270e9, 2.0, &no_absorption()).unwrap();
        assert_relative_eq!(base - mid, 0.03 * 2.0, epsilon = 1e-10);

        assert_eq!(
            path_gain_db(310e9, 1.0, &sloped).unwrap_err(),
            SynthError::FrequencyOutOfTable { freq_hz: 310e9 }
        );
    }

    #[test]
    fn misalignment_reference_points() {
        let one = LinkModel {
            rotated_antennas: 1,
            ..LinkModel::default()
        };
        let two = LinkModel::default();
        assert_eq!(misalignment_gain_db(0.0, &two), 0.0);
        // Half the HPBW off boresight is the 3 dB point by definition.
        assert_relative_eq!(misalignment_gain_db(6.0, &one), -3.0, epsilon = 1e-12);
        // A full HPBW with both ends rotated: -3 * 4 per antenna, twice.
        assert_relative_eq!(misalignment_gain_db(12.0, &two), -24.0, epsilon = 1e-12);
    }

    #[test]
    fn model_validation_rejects_bad_fields() {
        let mut m = LinkModel::default();
        m.path_loss_exponent = 0.0;
        assert!(m.validate().is_err());
        m = LinkModel::default();
        m.absorption_table = vec![];
        assert!(m.validate().is_err());
        m = LinkModel::default();
        m.absorption_table = vec![(300e9, 0.1), (240e9, 0.1)];
        assert!(m.validate().is_err());
        m = LinkModel::default();
        m.absorption_table[0].1 = -0.1;
        assert!(m.validate().is_err());
        m = LinkModel::default();
        m.rotated_antennas = 3;
        assert!(m.validate().is_err());
        m = LinkModel::default();
        m.fading_shape = 0.0;
        assert!(m.validate().is_err());
        assert!(LinkModel::default().validate().is_ok());
    }

    #[test]
    fn los_sweep_peaks_at_propagation_delay() {
        let meta = ScenarioMeta::new(0.3, 0.0, 0.0, "delay").unwrap();
        let grid = GridSpec::default();
        let sweep = synth_sweep(&meta, &grid, &LinkModel::default().without_fading(), 0).unwrap();
        let ir = impulse_response(&sweep, Window::Rect);
        let (delay, _) = peak_power_db(&ir);
        let t0 = 0.3 / SPEED_OF_LIGHT_M_PER_S;
        let bin = ir.delays_s()[1] - ir.delays_s()[0];
        assert!(
            (delay - t0).abs() <= bin,
            "peak at {delay}, expected {t0} within one bin {bin}"
        );
    }

    #[test]
    fn synthesis_is_seed_deterministic() {
        let meta = ScenarioMeta::new(0.5, 5.0, 10.0, "det").unwrap();
        let grid = GridSpec {
            n_points: 256,
            ..GridSpec::default()
        };
        let a = synth_sweep(&meta, &grid, &LinkModel::default(), 77).unwrap();
        let b = synth_sweep(&meta, &grid, &LinkModel::default(), 77).unwrap();
        assert_eq!(a, b);
        let c = synth_sweep(&meta, &grid, &LinkModel::default(), 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fading_multiplier_has_unit_mean() {
        let meta = ScenarioMeta::new(0.4, 0.0, 0.0, "fading").unwrap();
        let grid = GridSpec {
            f_start_hz: 240e9,
            f_stop_hz: 300e9,
            n_points: 100_000,
        };
        let model = LinkModel::default();
        let faded = synth_sweep(&meta, &grid, &model, 3).unwrap();
        let clean = synth_sweep(&meta, &grid, &model.without_fading(), 3).unwrap();
        let ratios: Vec<f64> = faded
            .s21()
            .iter()
            .zip(clean.s21())
            .map(|(a, b)| a.norm_sqr() / b.norm_sqr())
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        // Var of a unit-mean Gamma(shape) is 1/shape.
        let se = (1.0 / model.fading_shape / ratios.len() as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 3.0 * se,
            "fading mean {mean} outside 3 SE ({se})"
        );
    }

    #[test]
    fn phase_slope_is_the_delay_ramp() {
        let meta = ScenarioMeta::new(0.77, 0.0, 0.0, "phase").unwrap();
        let grid = GridSpec {
            n_points: 1024,
            ..GridSpec::default()
        };
        let sweep = synth_sweep(&meta, &grid, &LinkModel::default().without_fading(), 0).unwrap();
        let t0 = 0.77 / SPEED_OF_LIGHT_M_PER_S;
        let df = sweep.grid_spacing_hz();
        let expected = -2.0 * std::f64::consts::PI * t0;
        for pair in sweep.s21().windows(2) {
            let mut dphi = pair[1].arg() - pair[0].arg();
            while dphi > std::f64::consts::PI {
                dphi -= 2.0 * std::f64::consts::PI;
            }
            while dphi < -std::f64::consts::PI {
                dphi += 2.0 * std::f64::consts::PI;
            }
            let slope = dphi / df;
            assert_relative_eq!(slope, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn peaks_fall_monotonically_with_distance_and_angle() {
        let model = LinkModel::default().without_fading();
        let grid = GridSpec {
            n_points: 512,
            ..GridSpec::default()
        };
        let peak = |d: f64, a: f64| {
            let meta = ScenarioMeta::new(d, a, 0.0, "mono").unwrap();
            let sweep = synth_sweep(&meta, &grid, &model, 0).unwrap();
            peak_power_db(&impulse_response(&sweep, Window::Rect)).1
        };
        let distances = [0.2, 0.4, 0.6, 0.8, 1.0];
        let angles = [0.0, 5.0, 10.0, 15.0];
        for &a in &angles {
            let peaks: Vec<f64> = distances.iter().map(|&d| peak(d, a)).collect();
            for w in peaks.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "distance trend broke: {peaks:?}");
            }
        }
        for &d in &distances {
            let peaks: Vec<f64> = angles.iter().map(|&a| peak(d, a)).collect();
            for w in peaks.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "angle trend broke: {peaks:?}");
            }
        }
    }

    #[test]
    fn faded_magnitude_mean_tracks_the_clean_curve() {
        // With a mild fading shape the dB offset E[10 log10 g] is tiny, so
        // the mean magnitude curve stays within 0.2 dB of the fading-free one.
        let meta = ScenarioMeta::new(0.3, 0.0, 0.0, "cfr").unwrap();
        let grid = GridSpec::default();
        let model = LinkModel {
            fading_shape: 50.0,
            ..LinkModel::default()
        };
        let faded = synth_sweep(&meta, &grid, &model, 11).unwrap();
        let clean = synth_sweep(&meta, &grid, &model.without_fading(), 11).unwrap();
        let mean_db = |s: &Sweep| {
            let rows = frequency_response_db(s);
            rows.iter().map(|&(_, db)| db).sum::<f64>() / rows.len() as f64
        };
        assert!((mean_db(&faded) - mean_db(&clean)).abs() < 0.2);
    }

    #[test]
    fn config_text_overrides_defaults() {
        let text = "#path_loss_exponent 2.2\n#hpbw_deg 10\n#absorption_table 200e9:0.01,400e9:0.03\n#rotated_antennas 1\n#unrelated_key 42\n";
        let m = parse_link_model(text).unwrap();
        assert_eq!(m.path_loss_exponent, 2.2);
        assert_eq!(m.hpbw_deg, 10.0);
        assert_eq!(m.rotated_antennas, 1);
        assert_eq!(m.absorption_table, vec![(200e9, 0.01), (400e9, 0.03)]);
        // Untouched fields keep defaults.
        assert_eq!(m.antenna_gain_dbi, 24.8);

        assert!(matches!(
            parse_link_model("not a config"),
            Err(SynthError::MalformedConfig { line: 1, .. })
        ));
        assert!(matches!(
            parse_link_model("#fading_shape -2\n"),
            Err(SynthError::InvalidModel(_))
        ));
        assert!(matches!(
            parse_link_model("#absorption_table 1:b\n"),
            Err(SynthError::MalformedConfig { .. })
        ));
    }

    #[test]
    fn synth_path_invariants() {
        assert!(SynthPath::new(-1.0, 0.0).is_err());
        assert!(SynthPath::new(1.0, -1e-12).is_err());
        let p = SynthPath::line_of_sight(0.3).unwrap();
        assert_relative_eq!(p.delay_s, 0.3 / SPEED_OF_LIGHT_M_PER_S, epsilon = 1e-24);
        assert!(SynthPath::line_of_sight(0.0).is_err());
    }
}
