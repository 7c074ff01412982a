//! Gamma mixture models: representation, evaluation, sampling, and the EM
//! fitter, plus the special functions they need.
//!
//! The instantaneous-SNR distribution of a THz link is modeled as a finite
//! mixture of Gamma densities
//!
//! ```text
//! f(x) = sum_k w_k * rate_k^shape_k / Gamma(shape_k) * x^(shape_k - 1) * exp(-rate_k * x)
//! ```
//!
//! with positive weights summing to one. Components use the rate
//! parameterization throughout (mean = shape/rate); densities are evaluated
//! in log space so extreme SNR magnitudes cannot underflow intermediate
//! terms.

pub mod em;
pub mod special;

pub use special::{log_gamma, reg_lower_incomplete_gamma};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance on the mixture weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Errors from mixture construction and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum MixtureError {
    /// An argument lies outside its mathematical domain.
    Domain(String),
    /// Component parameters or weights violate the mixture invariants.
    InvalidMixture(String),
    /// Data passed to a likelihood routine contains a non-positive value.
    NonPositiveData { index: usize },
    /// An iterative expansion failed to settle within its budget.
    NoConvergence(String),
}

impl fmt::Display for MixtureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Domain(msg) => write!(f, "domain error: {msg}"),
            Self::InvalidMixture(msg) => write!(f, "invalid mixture: {msg}"),
            Self::NonPositiveData { index } => {
                write!(f, "data must be strictly positive, offending index {index}")
            }
            Self::NoConvergence(msg) => write!(f, "no convergence: {msg}"),
        }
    }
}

impl std::error::Error for MixtureError {}

/// One weighted Gamma component in rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaComponent {
    /// Mixing weight in (0, 1].
    pub weight: f64,
    /// Shape parameter, > 0.
    pub shape: f64,
    /// Rate parameter (inverse of the x units), > 0.
    pub rate: f64,
}

impl GammaComponent {
    /// Component mean, shape/rate.
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// Component variance, shape/rate^2.
    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    fn validate(&self, index: usize) -> Result<(), MixtureError> {
        let ok = self.weight.is_finite()
            && self.weight > 0.0
            && self.weight <= 1.0
            && self.shape.is_finite()
            && self.shape > 0.0
            && self.rate.is_finite()
            && self.rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(MixtureError::InvalidMixture(format!(
                "component {index} has weight={}, shape={}, rate={}; all must be positive and finite with weight <= 1",
                self.weight, self.shape, self.rate
            )))
        }
    }
}

/// A finite Gamma mixture: a non-empty component list whose weights sum to
/// one within [`WEIGHT_SUM_TOL`]. Immutable after construction.
///
/// Serializes as its component list; deserialization re-runs full
/// validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GammaComponent>", into = "Vec<GammaComponent>")]
pub struct GammaMixture {
    components: Vec<GammaComponent>,
}

impl TryFrom<Vec<GammaComponent>> for GammaMixture {
    type Error = MixtureError;

    fn try_from(components: Vec<GammaComponent>) -> Result<Self, MixtureError> {
        Self::new(components)
    }
}

impl From<GammaMixture> for Vec<GammaComponent> {
    fn from(m: GammaMixture) -> Self {
        m.components
    }
}

impl GammaMixture {
    /// Validates and builds a mixture.
    ///
    /// # Errors
    ///
    /// [`MixtureError::InvalidMixture`] on an empty list, a component with a
    /// non-positive or non-finite field, or a weight sum off by more than
    /// [`WEIGHT_SUM_TOL`].
    pub fn new(components: Vec<GammaComponent>) -> Result<Self, MixtureError> {
        if components.is_empty() {
            return Err(MixtureError::InvalidMixture(
                "a mixture needs at least one component".into(),
            ));
        }
        for (i, c) in components.iter().enumerate() {
            c.validate(i)?;
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MixtureError::InvalidMixture(format!(
                "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"
            )));
        }
        Ok(Self { components })
    }

    /// Single-component convenience constructor (weight 1).
    pub fn single(shape: f64, rate: f64) -> Result<Self, MixtureError> {
        Self::new(vec![GammaComponent {
            weight: 1.0,
            shape,
            rate,
        }])
    }

    /// Components in their stored order.
    pub fn components(&self) -> &[GammaComponent] {
        &self.components
    }

    /// Component count K, at least 1.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Mixture mean: weighted component means.
    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean()).sum()
    }

    /// Mixture variance via the law of total variance.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance() + c.mean() * c.mean()))
            .sum::<f64>()
            - mean * mean
    }
}

/// Converts a (mean, variance) pair to Gamma (shape, rate) by moment
/// matching, flooring the variance at a tiny multiple of mean^2 so duplicate
/// or near-constant data cannot produce infinite shapes.
pub(crate) fn moment_matched_gamma(mean: f64, variance: f64) -> (f64, f64) {
    let floor = 1e-12 * mean * mean;
    let var = variance.max(floor);
    (mean * mean / var, mean / var)
}

/// Log of the Gamma density; requires validated `shape > 0`, `rate > 0`,
/// `x > 0`.
pub(crate) fn log_gamma_pdf_unchecked(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - special::log_gamma_unchecked(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Gamma density in rate parameterization, evaluated in log space and
/// exponentiated.
///
/// At `x = 0` the density limit is used: 0 for shape > 1, `rate` for
/// shape = 1, and positive infinity for shape < 1 (the integrable
/// singularity of sub-exponential shapes).
///
/// # Errors
///
/// [`MixtureError::Domain`] for `shape <= 0`, `rate <= 0`, `x < 0`, or
/// non-finite arguments.
pub fn gamma_pdf(x: f64, shape: f64, rate: f64) -> Result<f64, MixtureError> {
    if !(shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0) {
        return Err(MixtureError::Domain(format!(
            "gamma_pdf requires shape > 0 and rate > 0, got shape={shape}, rate={rate}"
        )));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(MixtureError::Domain(format!(
            "gamma_pdf requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(match shape.partial_cmp(&1.0).expect("shape is finite") {
            std::cmp::Ordering::Greater => 0.0,
            std::cmp::Ordering::Equal => rate,
            std::cmp::Ordering::Less => f64::INFINITY,
        });
    }
    Ok(log_gamma_pdf_unchecked(x, shape, rate).exp())
}

/// Mixture density: the weighted sum of component densities.
///
/// # Errors
///
/// [`MixtureError::Domain`] for `x < 0` or non-finite `x`.
pub fn mixture_pdf(x: f64, m: &GammaMixture) -> Result<f64, MixtureError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(MixtureError::Domain(format!(
            "mixture_pdf requires x >= 0, got {x}"
        )));
    }
    let mut total = 0.0;
    for c in m.components() {
        total += c.weight * gamma_pdf(x, c.shape, c.rate)?;
    }
    Ok(total)
}

/// Mixture CDF: the weighted sum of regularized lower incomplete gamma
/// terms, clamped to [0, 1] against rounding at the boundaries.
///
/// # Errors
///
/// [`MixtureError::Domain`] for `x < 0` or non-finite `x`.
pub fn mixture_cdf(x: f64, m: &GammaMixture) -> Result<f64, MixtureError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(MixtureError::Domain(format!(
            "mixture_cdf requires x >= 0, got {x}"
        )));
    }
    let mut total = 0.0;
    for c in m.components() {
        total += c.weight * special::reg_lower_incomplete_gamma(c.shape, c.rate * x)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Draws `n` independent samples: component chosen by weight, value drawn
/// from that component's Gamma. Reproducible for a fixed seed; every draw is
/// strictly positive.
pub fn sample_mixture(m: &GammaMixture, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers: Vec<rand_distr::Gamma<f64>> = m
        .components()
        .iter()
        .map(|c| {
            rand_distr::Gamma::new(c.shape, 1.0 / c.rate)
                .expect("mixture invariants guarantee valid Gamma parameters")
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = m.k() - 1;
        for (j, c) in m.components().iter().enumerate() {
            acc += c.weight;
            if u < acc {
                idx = j;
                break;
            }
        }
        // Sub-normal shapes can underflow a raw draw to exactly zero; retry
        // to honor the strictly-positive contract.
        let mut v = samplers[idx].sample(&mut rng);
        let mut tries = 0;
        while !(v > 0.0) && tries < 64 {
            v = samplers[idx].sample(&mut rng);
            tries += 1;
        }
        if !(v > 0.0) {
            v = f64::MIN_POSITIVE;
        }
        out.push(v);
    }
    out
}

/// Mean log-likelihood of strictly positive data under a mixture: the
/// average over samples of `ln f(x_i)`, computed with log-sum-exp over
/// components.
///
/// # Errors
///
/// [`MixtureError::Domain`] on empty data;
/// [`MixtureError::NonPositiveData`] if any sample is non-positive or
/// non-finite.
pub fn mean_log_likelihood(data: &[f64], m: &GammaMixture) -> Result<f64, MixtureError> {
    if data.is_empty() {
        return Err(MixtureError::Domain(
            "mean_log_likelihood requires non-empty data".into(),
        ));
    }
    for (i, &x) in data.iter().enumerate() {
        if !(x.is_finite() && x > 0.0) {
            return Err(MixtureError::NonPositiveData { index: i });
        }
    }
    // Per-component constants: ln w + shape ln rate - ln Gamma(shape).
    let consts: Vec<(f64, f64, f64)> = m
        .components()
        .iter()
        .map(|c| {
            (
                c.weight.ln() + c.shape * c.rate.ln() - special::log_gamma_unchecked(c.shape),
                c.shape - 1.0,
                c.rate,
            )
        })
        .collect();
    let mut total = 0.0;
    let mut terms = vec![0.0; consts.len()];
    for &x in data {
        let lnx = x.ln();
        let mut max = f64::NEG_INFINITY;
        for (t, &(c0, am1, rate)) in terms.iter_mut().zip(&consts) {
            *t = c0 + am1 * lnx - rate * x;
            if *t > max {
                max = *t;
            }
        }
        let sum: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
        total += max + sum.ln();
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_component() -> GammaMixture {
        GammaMixture::new(vec![
            GammaComponent {
                weight: 0.4,
                shape: 2.0,
                rate: 4.0,
            },
            GammaComponent {
                weight: 0.6,
                shape: 20.0,
                rate: 2.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn construction_enforces_invariants() {
        assert!(GammaMixture::new(vec![]).is_err());
        assert!(GammaMixture::single(0.0, 1.0).is_err());
        assert!(GammaMixture::single(1.0, -1.0).is_err());
        assert!(GammaMixture::new(vec![GammaComponent {
            weight: 0.9, // does not sum to 1
            shape: 1.0,
            rate: 1.0,
        }])
        .is_err());
        assert!(GammaMixture::new(vec![GammaComponent {
            weight: f64::NAN,
            shape: 1.0,
            rate: 1.0,
        }])
        .is_err());
        let m = two_component();
        assert_eq!(m.k(), 2);
        assert_relative_eq!(m.mean(), 0.4 * 0.5 + 0.6 * 10.0, max_relative = 1e-14);
    }

    #[test]
    fn gamma_pdf_reference_points() {
        assert_relative_eq!(
            gamma_pdf(1.0, 1.0, 1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-13
        );
        assert_eq!(gamma_pdf(0.0, 2.0, 1.0).unwrap(), 0.0);
        // Frozen high-precision value of 4 * 0.5 * exp(-1).
        assert_relative_eq!(
            gamma_pdf(0.5, 2.0, 2.0).unwrap(),
            0.735758882342885,
            max_relative = 1e-12
        );
        // x = 0 limits by shape.
        assert_eq!(gamma_pdf(0.0, 1.0, 3.5).unwrap(), 3.5);
        assert_eq!(gamma_pdf(0.0, 0.5, 1.0).unwrap(), f64::INFINITY);
        assert!(gamma_pdf(-0.1, 1.0, 1.0).is_err());
        assert!(gamma_pdf(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_pdf_survives_extreme_magnitudes() {
        // Shapes and rates far outside the naive-evaluation range must not
        // overflow: everything runs in log space.
        let p = gamma_pdf(1e8, 400.0, 4e-6).unwrap();
        assert!(p.is_finite() && p > 0.0);
        // Near zero with shape 5 the density is x^4 e^{-x} / 24.
        let tiny = gamma_pdf(1e-30, 5.0, 1.0).unwrap();
        assert_relative_eq!(tiny, 1e-120 / 24.0, max_relative = 1e-12);
        let under = gamma_pdf(1e-300, 5.0, 1.0).unwrap();
        assert_eq!(under, 0.0); // underflows cleanly, not NaN
    }

    #[test]
    fn mixture_pdf_degenerate_cases() {
        let single = GammaMixture::single(2.0, 3.0).unwrap();
        for x in [0.1, 1.0, 7.5] {
            assert_relative_eq!(
                mixture_pdf(x, &single).unwrap(),
                gamma_pdf(x, 2.0, 3.0).unwrap(),
                max_relative = 1e-14
            );
        }
        let split = GammaMixture::new(vec![
            GammaComponent {
                weight: 0.3,
                shape: 2.0,
                rate: 3.0,
            },
            GammaComponent {
                weight: 0.7,
                shape: 2.0,
                rate: 3.0,
            },
        ])
        .unwrap();
        for x in [0.1, 1.0, 7.5] {
            assert_relative_eq!(
                mixture_pdf(x, &split).unwrap(),
                gamma_pdf(x, 2.0, 3.0).unwrap(),
                max_relative = 1e-14
            );
        }
        assert!(mixture_pdf(-1.0, &single).is_err());
    }

    #[test]
    fn mixture_pdf_integrates_to_one() {
        // Independent oracle: plain recursive Simpson on the density alone.
        fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(a + i as f64 * h);
            }
            s * h / 3.0
        }
        let m = two_component();
        let f = |x: f64| mixture_pdf(x, &m).unwrap();
        let total = simpson(&f, 1e-12, 60.0, 200_000);
        assert_relative_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn mixture_cdf_reference_points() {
        let exp1 = GammaMixture::single(1.0, 1.0).unwrap();
        assert_eq!(mixture_cdf(0.0, &exp1).unwrap(), 0.0);
        assert_relative_eq!(
            mixture_cdf(1.0, &exp1).unwrap(),
            0.632120558828558,
            max_relative = 1e-12
        );
        let m = two_component();
        let far = 1e9 * m.components().iter().map(|c| c.mean()).fold(0.0, f64::max);
        assert!((mixture_cdf(far, &m).unwrap() - 1.0).abs() <= 1e-10);
        assert!(mixture_cdf(-0.5, &m).is_err());
    }

    #[test]
    fn sample_mixture_is_deterministic_and_unbiased() {
        let m = GammaMixture::single(2.0, 2.0).unwrap();
        let a = sample_mixture(&m, 1_000_000, 99);
        let b = sample_mixture(&m, 1_000_000, 99);
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x > 0.0));
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        // Mean 1, variance 0.5: allow 3 sigma of the sample mean.
        let bound = 3.0 * (0.5f64 / a.len() as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < bound,
            "sample mean {mean} outside {bound} of 1.0"
        );
    }

    #[test]
    fn sample_mixture_tracks_its_own_cdf() {
        let m = two_component();
        let samples = sample_mixture(&m, 100_000, 7);
        let d = crate::gof::ks_statistic(&samples, |x| mixture_cdf(x, &m).unwrap()).unwrap();
        // 1% critical value of the one-sample KS statistic.
        let crit = 1.628 / (samples.len() as f64).sqrt();
        assert!(d < crit, "KS distance {d} above the 1% critical value {crit}");
    }

    #[test]
    fn mean_log_likelihood_reference_points() {
        let exp1 = GammaMixture::single(1.0, 1.0).unwrap();
        assert_relative_eq!(
            mean_log_likelihood(&[1.0], &exp1).unwrap(),
            -1.0,
            max_relative = 1e-14
        );
        // The 1/n form is invariant to duplicating the dataset.
        let m = two_component();
        let data = sample_mixture(&m, 500, 3);
        let doubled: Vec<f64> = data.iter().chain(&data).copied().collect();
        assert_relative_eq!(
            mean_log_likelihood(&data, &m).unwrap(),
            mean_log_likelihood(&doubled, &m).unwrap(),
            max_relative = 1e-12
        );
        assert!(mean_log_likelihood(&[], &m).is_err());
        assert_eq!(
            mean_log_likelihood(&[1.0, 0.0], &m).unwrap_err(),
            MixtureError::NonPositiveData { index: 1 }
        );
    }

    #[test]
    fn mean_log_likelihood_matches_naive_summation() {
        let m = two_component();
        let data = sample_mixture(&m, 300, 11);
        let naive = data
            .iter()
            .map(|&x| mixture_pdf(x, &m).unwrap().ln())
            .sum::<f64>()
            / data.len() as f64;
        assert_relative_eq!(
            mean_log_likelihood(&data, &m).unwrap(),
            naive,
            max_relative = 1e-12
        );
    }

    prop_compose! {
        fn arb_mixture()(k in 1usize..5)(
            weights in prop::collection::vec(0.05..1.0f64, k),
            shapes in prop::collection::vec(0.3..60.0f64, k),
            rates in prop::collection::vec(0.01..20.0f64, k),
        ) -> GammaMixture {
            let total: f64 = weights.iter().sum();
            let mut comps: Vec<GammaComponent> = weights
                .iter()
                .zip(&shapes)
                .zip(&rates)
                .map(|((&w, &a), &b)| GammaComponent { weight: w / total, shape: a, rate: b })
                .collect();
            // Absorb rounding into the last weight to satisfy the sum invariant.
            let sum_head: f64 = comps[..comps.len() - 1].iter().map(|c| c.weight).sum();
            comps.last_mut().unwrap().weight = 1.0 - sum_head;
            GammaMixture::new(comps).unwrap()
        }
    }

    proptest! {
        #[test]
        fn prop_mixture_cdf_monotone(m in arb_mixture(), mut xs in prop::collection::vec(0.0..100.0f64, 2..40)) {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = 0.0;
            for &x in &xs {
                let c = mixture_cdf(x, &m).unwrap();
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!(c + 1e-12 >= prev);
                prev = c;
            }
        }
    }
}
