//! Frequency-sweep S21 records: the interchange type between measurement
//! (or synthesis) and every downstream processing stage.
//!
//! A sweep is a strictly ascending, uniformly spaced frequency grid with one
//! complex S21 value per point, plus the scenario metadata needed to
//! interpret it (TX-RX distance, antenna misalignment angle, transmit
//! power, free-form label).
//!
//! The on-disk form is line-oriented UTF-8 text:
//!
//! ```text
//! #sweep v1
//! #distance_m 0.2
//! #angle_deg 0
//! #p_tx_dbm 0
//! #label 20cm_boresight
//! 240000000000 0.0012 -0.0034
//! ...
//! ```
//!
//! Header lines appear in exactly that order; each data line is
//! `freq_hz re im` in ascending frequency. [`write_sweep`] emits floats in
//! shortest round-trip form, so `parse_sweep(write_sweep(s))` reproduces `s`
//! field for field.

use num_complex::Complex64;
use std::fmt;

/// Relative tolerance for grid-uniformity checks: spacing may deviate from
/// the nominal step by at most one part in 1e6.
pub const GRID_UNIFORMITY_REL_TOL: f64 = 1e-6;

/// Scenario metadata carried alongside every sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawScenarioMeta")]
pub struct ScenarioMeta {
    /// TX-RX separation in meters, > 0.
    pub distance_m: f64,
    /// Antenna misalignment angle in degrees, in [0, 90).
    pub angle_deg: f64,
    /// Transmit power in dBm.
    pub p_tx_dbm: f64,
    /// Free-form single-line label.
    pub label: String,
}

/// Unvalidated deserialization shadow; conversion runs the constructor so
/// serialized metadata cannot bypass the invariants.
#[derive(serde::Deserialize)]
struct RawScenarioMeta {
    distance_m: f64,
    angle_deg: f64,
    p_tx_dbm: f64,
    label: String,
}

impl TryFrom<RawScenarioMeta> for ScenarioMeta {
    type Error = SweepError;

    fn try_from(r: RawScenarioMeta) -> Result<Self, SweepError> {
        ScenarioMeta::new(r.distance_m, r.angle_deg, r.p_tx_dbm, r.label)
    }
}

impl ScenarioMeta {
    /// Validates and builds scenario metadata.
    ///
    /// # Errors
    ///
    /// [`SweepError::InvalidMeta`] if the distance is not a positive finite
    /// number, the angle lies outside `[0, 90)`, the power is non-finite, or
    /// the label contains a line break.
    pub fn new(
        distance_m: f64,
        angle_deg: f64,
        p_tx_dbm: f64,
        label: impl Into<String>,
    ) -> Result<Self, SweepError> {
        let label = label.into();
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(SweepError::InvalidMeta(format!(
                "distance_m must be positive and finite, got {distance_m}"
            )));
        }
        if !(angle_deg.is_finite() && (0.0..90.0).contains(&angle_deg)) {
            return Err(SweepError::InvalidMeta(format!(
                "angle_deg must lie in [0, 90), got {angle_deg}"
            )));
        }
        if !p_tx_dbm.is_finite() {
            return Err(SweepError::InvalidMeta(format!(
                "p_tx_dbm must be finite, got {p_tx_dbm}"
            )));
        }
        if label.contains('\n') || label.contains('\r') {
            return Err(SweepError::InvalidMeta(
                "label must not contain line breaks".into(),
            ));
        }
        Ok(Self {
            distance_m,
            angle_deg,
            p_tx_dbm,
            label,
        })
    }
}

/// A complex S21 frequency sweep on a uniform ascending grid.
///
/// Construction enforces the invariants every consumer relies on: at least
/// two points, equal array lengths, finite values, strictly ascending
/// frequencies, and uniform spacing within [`GRID_UNIFORMITY_REL_TOL`].
/// Instances are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    freqs_hz: Vec<f64>,
    s21: Vec<Complex64>,
    meta: ScenarioMeta,
}

impl Sweep {
    /// Builds a sweep from parallel arrays, validating all grid invariants.
    ///
    /// # Errors
    ///
    /// - [`SweepError::ArrayLengthMismatch`] if the arrays differ in length.
    /// - [`SweepError::TooFewPoints`] for fewer than two points.
    /// - [`SweepError::NonFiniteValue`] if any frequency or S21 part is not
    ///   finite (the reported line is the 1-based sample index).
    /// - [`SweepError::NonAscendingFrequency`] if the grid ever fails to
    ///   increase.
    /// - [`SweepError::NonUniformGrid`] if any step deviates from the nominal
    ///   spacing by more than one part in 1e6.
    pub fn new(
        freqs_hz: Vec<f64>,
        s21: Vec<Complex64>,
        meta: ScenarioMeta,
    ) -> Result<Self, SweepError> {
        if freqs_hz.len() != s21.len() {
            return Err(SweepError::ArrayLengthMismatch {
                freqs: freqs_hz.len(),
                s21: s21.len(),
            });
        }
        if freqs_hz.len() < 2 {
            return Err(SweepError::TooFewPoints);
        }
        for (i, (&f, v)) in freqs_hz.iter().zip(&s21).enumerate() {
            if !(f.is_finite() && v.re.is_finite() && v.im.is_finite()) {
                return Err(SweepError::NonFiniteValue { line: i + 1 });
            }
        }
        for i in 1..freqs_hz.len() {
            if freqs_hz[i] <= freqs_hz[i - 1] {
                return Err(SweepError::NonAscendingFrequency { line: i + 1 });
            }
        }
        let n = freqs_hz.len();
        let nominal = (freqs_hz[n - 1] - freqs_hz[0]) / (n - 1) as f64;
        for i in 1..n {
            let step = freqs_hz[i] - freqs_hz[i - 1];
            if (step - nominal).abs() > GRID_UNIFORMITY_REL_TOL * nominal {
                return Err(SweepError::NonUniformGrid { line: i + 1 });
            }
        }
        Ok(Self {
            freqs_hz,
            s21,
            meta,
        })
    }

    /// Frequency grid in Hz, strictly ascending and uniform.
    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    /// Complex S21 value per grid point.
    pub fn s21(&self) -> &[Complex64] {
        &self.s21
    }

    /// Scenario metadata.
    pub fn meta(&self) -> &ScenarioMeta {
        &self.meta
    }

    /// Number of grid points (at least two).
    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    /// Always false; kept for container-interface symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nominal grid spacing in Hz: total span divided by step count.
    pub fn grid_spacing_hz(&self) -> f64 {
        let n = self.freqs_hz.len();
        (self.freqs_hz[n - 1] - self.freqs_hz[0]) / (n - 1) as f64
    }
}

/// Errors from sweep construction, parsing, and calibration.
///
/// Line numbers are 1-based positions in the parsed text; for arrays
/// validated in memory they are 1-based sample indices.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepError {
    /// A required header line is missing, out of order, or mis-keyed.
    MalformedHeader { line: usize },
    /// A numeric field failed to parse.
    MalformedValue { line: usize },
    /// A data line does not have exactly three whitespace-separated fields,
    /// or parallel arrays differ in length (see `ArrayLengthMismatch`).
    LengthMismatch { line: usize },
    /// A frequency or S21 component is NaN or infinite.
    NonFiniteValue { line: usize },
    /// The frequency grid failed to strictly increase.
    NonAscendingFrequency { line: usize },
    /// A grid step deviates from the nominal spacing by more than one part
    /// in 1e6.
    NonUniformGrid { line: usize },
    /// Fewer than two data points.
    TooFewPoints,
    /// Constructor arrays have different lengths.
    ArrayLengthMismatch { freqs: usize, s21: usize },
    /// Calibration and measurement grids are not identical.
    GridMismatch,
    /// A calibration S21 value is exactly zero and cannot divide.
    ZeroCalibrationValue { index: usize },
    /// Scenario metadata violates its domain.
    InvalidMeta(String),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MalformedHeader { line } => {
                write!(f, "malformed or missing header at line {line}")
            }
            Self::MalformedValue { line } => {
                write!(f, "unparseable numeric value at line {line}")
            }
            Self::LengthMismatch { line } => {
                write!(f, "expected 3 fields (freq_hz re im) at line {line}")
            }
            Self::NonFiniteValue { line } => write!(f, "non-finite value at line {line}"),
            Self::NonAscendingFrequency { line } => {
                write!(f, "frequency grid not strictly ascending at line {line}")
            }
            Self::NonUniformGrid { line } => {
                write!(
                    f,
                    "grid spacing deviates beyond {GRID_UNIFORMITY_REL_TOL:e} relative at line {line}"
                )
            }
            Self::TooFewPoints => write!(f, "a sweep needs at least 2 data points"),
            Self::ArrayLengthMismatch { freqs, s21 } => {
                write!(f, "{freqs} frequencies but {s21} S21 values")
            }
            Self::GridMismatch => {
                write!(f, "calibration grid does not match the measurement grid")
            }
            Self::ZeroCalibrationValue { index } => {
                write!(f, "calibration S21 is zero at index {index}")
            }
            Self::InvalidMeta(msg) => write!(f, "invalid scenario metadata: {msg}"),
        }
    }
}

impl std::error::Error for SweepError {}

const MAGIC: &str = "#sweep v1";

/// Parses the line-oriented sweep text format.
///
/// # Errors
///
/// Every variant of [`SweepError`] except the calibration ones; each carries
/// the offending 1-based line number where applicable.
pub fn parse_sweep(input: &str) -> Result<Sweep, SweepError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| {
        // Tolerate CRLF input; the canonical form is LF.
        (i + 1, l.strip_suffix('\r').unwrap_or(l))
    });

    let (line_no, magic) = lines.next().ok_or(SweepError::MalformedHeader { line: 1 })?;
    if magic != MAGIC {
        return Err(SweepError::MalformedHeader { line: line_no });
    }

    let mut take_header = |key: &str| -> Result<(usize, String), SweepError> {
        let (line_no, line) = lines
            .next()
            .ok_or(SweepError::MalformedHeader { line: 0 })?;
        match line.strip_prefix(key) {
            Some(rest) if rest.is_empty() => Ok((line_no, String::new())),
            Some(rest) => match rest.strip_prefix(' ') {
                Some(value) => Ok((line_no, value.to_string())),
                None => Err(SweepError::MalformedHeader { line: line_no }),
            },
            None => Err(SweepError::MalformedHeader { line: line_no }),
        }
    };

    let mut take_float_header = |key: &str| -> Result<(usize, f64), SweepError> {
        let (line_no, value) = take_header(key)?;
        let parsed: f64 = value
            .trim()
            .parse()
            .map_err(|_| SweepError::MalformedValue { line: line_no })?;
        if !parsed.is_finite() {
            return Err(SweepError::NonFiniteValue { line: line_no });
        }
        Ok((line_no, parsed))
    };

    let (_, distance_m) = take_float_header("#distance_m")?;
    let (_, angle_deg) = take_float_header("#angle_deg")?;
    let (_, p_tx_dbm) = take_float_header("#p_tx_dbm")?;
    let (_, label) = take_header("#label")?;
    let meta = ScenarioMeta::new(distance_m, angle_deg, p_tx_dbm, label)?;

    let mut freqs_hz = Vec::new();
    let mut s21 = Vec::new();
    for (line_no, line) in lines {
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), Some(c), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(SweepError::LengthMismatch { line: line_no });
        };
        let parse = |tok: &str| -> Result<f64, SweepError> {
            let v: f64 = tok
                .parse()
                .map_err(|_| SweepError::MalformedValue { line: line_no })?;
            if !v.is_finite() {
                return Err(SweepError::NonFiniteValue { line: line_no });
            }
            Ok(v)
        };
        let freq = parse(a)?;
        let re = parse(b)?;
        let im = parse(c)?;
        if let Some(&prev) = freqs_hz.last() {
            if freq <= prev {
                return Err(SweepError::NonAscendingFrequency { line: line_no });
            }
        }
        freqs_hz.push(freq);
        s21.push(Complex64::new(re, im));
    }

    if freqs_hz.len() < 2 {
        return Err(SweepError::TooFewPoints);
    }
    // Re-map uniformity failures to absolute file lines (5 header lines).
    match Sweep::new(freqs_hz, s21, meta) {
        Ok(sweep) => Ok(sweep),
        Err(SweepError::NonUniformGrid { line }) => {
            Err(SweepError::NonUniformGrid { line: line + 5 })
        }
        Err(other) => Err(other),
    }
}

/// Serializes a sweep to the canonical text format.
///
/// Floats are written in shortest round-trip decimal form, so parsing the
/// output reproduces the input exactly.
pub fn write_sweep(sweep: &Sweep) -> String {
    let meta = sweep.meta();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("#distance_m {}\n", meta.distance_m));
    out.push_str(&format!("#angle_deg {}\n", meta.angle_deg));
    out.push_str(&format!("#p_tx_dbm {}\n", meta.p_tx_dbm));
    out.push_str(&format!("#label {}\n", meta.label));
    for (f, v) in sweep.freqs_hz().iter().zip(sweep.s21()) {
        out.push_str(&format!("{} {} {}\n", f, v.re, v.im));
    }
    out
}

/// Divides a raw measurement by a through-calibration reference, point by
/// point, removing the instrument response.
///
/// The result keeps the measurement's metadata.
///
/// # Errors
///
/// - [`SweepError::GridMismatch`] unless both grids are identical point for
///   point.
/// - [`SweepError::ZeroCalibrationValue`] if any calibration point is
///   exactly zero.
/// - [`SweepError::NonFiniteValue`] if the division overflows.
pub fn apply_calibration(measurement: &Sweep, calibration: &Sweep) -> Result<Sweep, SweepError> {
    if measurement.len() != calibration.len()
        || measurement
            .freqs_hz()
            .iter()
            .zip(calibration.freqs_hz())
            .any(|(a, b)| a != b)
    {
        return Err(SweepError::GridMismatch);
    }
    let mut corrected = Vec::with_capacity(measurement.len());
    for (i, (m, c)) in measurement.s21().iter().zip(calibration.s21()).enumerate() {
        if c.re == 0.0 && c.im == 0.0 {
            return Err(SweepError::ZeroCalibrationValue { index: i });
        }
        corrected.push(m / c);
    }
    Sweep::new(
        measurement.freqs_hz().to_vec(),
        corrected,
        measurement.meta().clone(),
    )
}
