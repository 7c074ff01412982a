//! One-sample Kolmogorov-Smirnov test of data against a fitted mixture CDF.
//!
//! The statistic is the exact supremum distance between the right-continuous
//! empirical CDF and the reference CDF, evaluated from both sides of every
//! jump. The p-value uses the asymptotic Kolmogorov tail with the standard
//! finite-n correction of the effective sample size.

use crate::mixture::{mixture_cdf, GammaMixture, MixtureError};
use std::fmt;

/// Outcome of a KS test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KsResult {
    /// Supremum distance D in [0, 1].
    pub statistic: f64,
    /// Asymptotic p-value in [0, 1].
    pub p_value: f64,
    /// Sample count the statistic was computed from.
    pub n: usize,
    /// True when `p_value >= threshold`.
    pub pass: bool,
}

/// Errors from the KS routines.
#[derive(Debug, Clone, PartialEq)]
pub enum GofError {
    /// Empty data, a non-finite sample, or an argument outside its domain.
    Domain(String),
    /// The reference CDF returned a value outside [0, 1] or NaN.
    InvalidCdf { x: f64, value: f64 },
    /// Propagated mixture evaluation failure.
    Mixture(MixtureError),
}

impl fmt::Display for GofError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Domain(msg) => write!(f, "domain error: {msg}"),
            Self::InvalidCdf { x, value } => {
                write!(f, "reference CDF returned {value} at x={x}, outside [0, 1]")
            }
            Self::Mixture(e) => write!(f, "mixture evaluation failed: {e}"),
        }
    }
}

impl std::error::Error for GofError {}

impl From<MixtureError> for GofError {
    fn from(e: MixtureError) -> Self {
        Self::Mixture(e)
    }
}

/// Exact one-sample KS statistic of `data` against a reference CDF.
///
/// For sorted samples x_(1) <= ... <= x_(n),
/// `D = max_i max(i/n - G(x_(i)), G(x_(i)) - (i-1)/n)`, the supremum of
/// |ECDF - G| since G is monotone between data points.
///
/// # Errors
///
/// [`GofError::Domain`] on empty or non-finite data;
/// [`GofError::InvalidCdf`] if the CDF leaves [0, 1].
pub fn ks_statistic<F>(data: &[f64], mut cdf: F) -> Result<f64, GofError>
where
    F: FnMut(f64) -> f64,
{
    if data.is_empty() {
        return Err(GofError::Domain("ks_statistic requires non-empty data".into()));
    }
    if let Some((i, &x)) = data.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(GofError::Domain(format!(
            "non-finite sample {x} at index {i}"
        )));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("checked finite"));
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let g = cdf(x);
        if !(0.0..=1.0).contains(&g) {
            return Err(GofError::InvalidCdf { x, value: g });
        }
        let upper = (i + 1) as f64 / n - g;
        let lower = g - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    Ok(d)
}

/// Asymptotic KS p-value: the Kolmogorov tail
/// `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)` at
/// `lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * d`, with series terms below
/// 1e-12 truncated and the result clamped to [0, 1].
///
/// # Errors
///
/// [`GofError::Domain`] unless `0 <= d <= 1` and `n >= 1`.
pub fn ks_pvalue(d: f64, n: usize) -> Result<f64, GofError> {
    if !(d.is_finite() && (0.0..=1.0).contains(&d)) {
        return Err(GofError::Domain(format!(
            "statistic must lie in [0, 1], got {d}"
        )));
    }
    if n < 1 {
        return Err(GofError::Domain("sample count must be >= 1".into()));
    }
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    // The Kolmogorov CDF is below 1e-100 for lambda < 0.04, so the tail is
    // 1.0 to double precision; the alternating series would need ~3.7/lambda
    // terms there, far past the truncation budget.
    if lambda < 0.04 {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=1000 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    Ok((2.0 * sum).clamp(0.0, 1.0))
}

/// Composes [`ks_statistic`] against [`mixture_cdf`] with [`ks_pvalue`];
/// `pass` is `p_value >= threshold`.
///
/// # Errors
///
/// [`GofError::Domain`] on empty/non-positive data or a threshold outside
/// [0, 1]; mixture CDF failures propagate.
pub fn ks_test(data: &[f64], m: &GammaMixture, threshold: f64) -> Result<KsResult, GofError> {
    if !(threshold.is_finite() && (0.0..=1.0).contains(&threshold)) {
        return Err(GofError::Domain(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    if data.is_empty() {
        return Err(GofError::Domain("ks_test requires non-empty data".into()));
    }
    if let Some((i, &x)) = data.iter().enumerate().find(|(_, &x)| !(x.is_finite() && x > 0.0)) {
        return Err(GofError::Domain(format!(
            "SNR samples must be strictly positive, got {x} at index {i}"
        )));
    }
    let mut err: Option<MixtureError> = None;
    let statistic = ks_statistic(data, |x| match mixture_cdf(x, m) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NAN
        }
    });
    if let Some(e) = err {
        return Err(e.into());
    }
    let statistic = statistic?;
    let p_value = ks_pvalue(statistic, data.len())?;
    Ok(KsResult {
        statistic,
        p_value,
        n: data.len(),
        pass: p_value >= threshold,
    })
}
