//! Expectation-maximization fitting of Gamma mixtures.
//!
//! The E-step computes latent responsibilities in log space with log-sum-exp
//! stabilization; the M-step re-estimates weights from responsibility mass
//! and converts each component's weighted mean and variance to (shape, rate)
//! by moment matching (shape = mean^2/var, rate = mean/var). Iteration stops
//! when the mean log-likelihood moves by less than `epsilon` or `max_iters`
//! is reached; the best of `n_restarts` differently initialized runs wins.
//!
//! Because the moment-matched M-step is not an exact maximizer, a parameter
//! update is only adopted if it does not reduce the mean log-likelihood;
//! a reducing step terminates the run at the previous parameters. This keeps
//! the recorded trace monotone, which downstream audits rely on.

use super::{moment_matched_gamma, GammaComponent, GammaMixture};
use crate::stream_rng;
use rand::Rng;
use std::fmt;

/// Responsibilities are floored at this value so later log/ratio work never
/// sees an exact zero.
const RESP_FLOOR: f64 = 1e-300;

/// A component whose total responsibility mass falls below this is dead.
const MASS_FLOOR: f64 = 1e-9;

/// Configuration for [`em_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Component count K, >= 1.
    pub k: usize,
    /// Convergence threshold on the mean log-likelihood change, > 0.
    pub epsilon: f64,
    /// Iteration cap per restart, >= 1.
    pub max_iters: usize,
    /// Seed for restart-initialization jitter.
    pub seed: u64,
    /// Number of independently initialized runs, >= 1; best final
    /// likelihood wins.
    pub n_restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            k: 4,
            epsilon: 1e-6,
            max_iters: 500,
            seed: 0,
            n_restarts: 4,
        }
    }
}

/// Per-run audit record: the accepted mean log-likelihood value at each
/// iteration plus the responsibility-matrix dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// Mean log-likelihood after each accepted iteration, starting with the
    /// initialization value. Non-decreasing within 1e-9.
    pub mean_log_likelihood: Vec<f64>,
    /// Sample count n of the responsibility matrix.
    pub n: usize,
    /// Component count K of the responsibility matrix.
    pub k: usize,
}

/// Result of an EM run: the fitted mixture, the winning restart's trace,
/// and whether that restart met the `epsilon` criterion before `max_iters`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub mixture: GammaMixture,
    pub trace: EmTrace,
    /// True when iteration stopped by the likelihood criterion (or by
    /// reaching an improvement fixed point); false when `max_iters` ran out.
    /// Non-convergence is reported here rather than as an error.
    pub converged: bool,
}

impl EmFit {
    /// Number of accepted EM iterations (initialization excluded).
    pub fn iterations(&self) -> usize {
        self.trace.mean_log_likelihood.len().saturating_sub(1)
    }

    /// Final mean log-likelihood of the winning restart.
    pub fn final_mean_log_likelihood(&self) -> f64 {
        *self
            .trace
            .mean_log_likelihood
            .last()
            .expect("trace always holds the initialization value")
    }
}

/// Errors from [`em_fit`].
#[derive(Debug, Clone, PartialEq)]
pub enum EmError {
    /// Configuration violates its invariants.
    InvalidConfig(String),
    /// Data is too short or contains non-positive/non-finite values.
    InvalidData(String),
    /// A component's responsibility mass or variance underflowed and a
    /// single re-seed did not recover it.
    DegenerateComponent { component: usize },
}

impl fmt::Display for EmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig(msg) => write!(f, "invalid EM config: {msg}"),
            Self::InvalidData(msg) => write!(f, "invalid EM data: {msg}"),
            Self::DegenerateComponent { component } => {
                write!(f, "component {component} degenerated beyond recovery")
            }
        }
    }
}

impl std::error::Error for EmError {}

struct Params {
    weights: Vec<f64>,
    shapes: Vec<f64>,
    rates: Vec<f64>,
}

impl Params {
    fn to_mixture(&self) -> Result<GammaMixture, EmError> {
        let comps: Vec<GammaComponent> = self
            .weights
            .iter()
            .zip(&self.shapes)
            .zip(&self.rates)
            .map(|((&w, &a), &b)| GammaComponent {
                weight: w,
                shape: a,
                rate: b,
            })
            .collect();
        GammaMixture::new(comps).map_err(|e| EmError::InvalidData(e.to_string()))
    }
}

/// Fits a K-component Gamma mixture by EM.
///
/// # Errors
///
/// - [`EmError::InvalidConfig`] for a zero K, non-positive epsilon, zero
///   iteration budget, or zero restarts.
/// - [`EmError::InvalidData`] if the data is shorter than `10 * k` or
///   contains non-positive or non-finite values.
/// - [`EmError::DegenerateComponent`] when a component's mass or variance
///   underflows and one re-seed does not recover it.
pub fn em_fit(data: &[f64], cfg: &EmConfig) -> Result<EmFit, EmError> {
    if cfg.k < 1 {
        return Err(EmError::InvalidConfig("k must be >= 1".into()));
    }
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        return Err(EmError::InvalidConfig(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }
    if cfg.max_iters < 1 {
        return Err(EmError::InvalidConfig("max_iters must be >= 1".into()));
    }
    if cfg.n_restarts < 1 {
        return Err(EmError::InvalidConfig("n_restarts must be >= 1".into()));
    }
    if data.len() < 10 * cfg.k {
        return Err(EmError::InvalidData(format!(
            "need at least {} samples for k={}, got {}",
            10 * cfg.k,
            cfg.k,
            data.len()
        )));
    }
    for (i, &x) in data.iter().enumerate() {
        if !(x.is_finite() && x > 0.0) {
            return Err(EmError::InvalidData(format!(
                "data must be strictly positive and finite, offending index {i}"
            )));
        }
    }

    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    let lnx: Vec<f64> = data.iter().map(|&x| x.ln()).collect();

    let mut best: Option<(f64, EmFit)> = None;
    let mut first_error: Option<EmError> = None;
    for restart in 0..cfg.n_restarts {
        let result = run_single(data, &lnx, &sorted, cfg, restart);
        match result {
            Ok(fit) => {
                let score = fit.final_mean_log_likelihood();
                if best.as_ref().map_or(true, |(s, _)| score > *s) {
                    best = Some((score, fit));
                }
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    match best {
        Some((_, fit)) => Ok(fit),
        None => Err(first_error.expect("n_restarts >= 1 guarantees at least one outcome")),
    }
}

fn run_single(
    data: &[f64],
    lnx: &[f64],
    sorted: &[f64],
    cfg: &EmConfig,
    restart: usize,
) -> Result<EmFit, EmError> {
    let n = data.len();
    let k = cfg.k;
    let mut rng = stream_rng(cfg.seed, restart as u64);
    let mut params = quantile_init(sorted, k, restart, &mut rng);

    let mut resp = vec![0.0; n * k];
    let mut current = e_step(data, lnx, &params, &mut resp);
    let mut trace = vec![current];
    let mut converged = false;
    let mut reseeded = vec![false; k];

    for _ in 0..cfg.max_iters {
        let candidate = loop {
            match m_step(data, &resp, k) {
                Ok(p) => break p,
                Err(dead) => {
                    if reseeded[dead] {
                        return Err(EmError::DegenerateComponent { component: dead });
                    }
                    reseeded[dead] = true;
                    reseed_component(&mut params, dead, sorted, &mut rng);
                    current = e_step(data, lnx, &params, &mut resp);
                    // A re-seed is a re-initialization: restart the trace so
                    // its monotonicity guarantee stays intact.
                    trace.clear();
                    trace.push(current);
                }
            }
        };
        let mut next_resp = vec![0.0; n * k];
        let next = e_step(data, lnx, &candidate, &mut next_resp);
        if !next.is_finite() || next < current - 1e-12 {
            // The moment-matched step stopped improving the likelihood;
            // keep the previous parameters. This is a fixed point of the
            // update, so the run counts as converged.
            converged = true;
            break;
        }
        let delta = next - current;
        params = candidate;
        resp = next_resp;
        current = next;
        trace.push(current);
        if delta.abs() < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(EmFit {
        mixture: params.to_mixture()?,
        trace: EmTrace {
            mean_log_likelihood: trace,
            n,
            k,
        },
        converged,
    })
}

/// Splits the sorted data into K contiguous blocks and moment-matches each.
/// Restart 0 uses exact quantile boundaries; later restarts jitter them.
fn quantile_init(sorted: &[f64], k: usize, restart: usize, rng: &mut impl Rng) -> Params {
    let n = sorted.len();
    let mut bounds: Vec<usize> = (0..=k).map(|j| j * n / k).collect();
    if restart > 0 {
        let span = (n / k) as f64 * 0.4;
        for b in bounds.iter_mut().take(k).skip(1) {
            let shift = ((rng.random::<f64>() - 0.5) * 2.0 * span) as isize;
            *b = (*b as isize + shift).max(0) as usize;
        }
        bounds.sort_unstable();
        // Keep every block at least 2 samples wide.
        for j in 1..=k {
            let lo = bounds[j - 1] + 2;
            bounds[j] = bounds[j].clamp(lo.min(n), n);
        }
        bounds[k] = n;
    }
    let mut weights = Vec::with_capacity(k);
    let mut shapes = Vec::with_capacity(k);
    let mut rates = Vec::with_capacity(k);
    for j in 0..k {
        let block = &sorted[bounds[j]..bounds[j + 1]];
        // Jitter can starve a block; fall back to whole-data moments.
        let (mean, var) = if block.len() >= 2 {
            block_moments(block)
        } else {
            block_moments(sorted)
        };
        let (shape, rate) = moment_matched_gamma(mean, var);
        weights.push(block.len().max(1) as f64 / n as f64);
        shapes.push(shape);
        rates.push(rate);
    }
    normalize(&mut weights);
    Params {
        weights,
        shapes,
        rates,
    }
}

fn block_moments(block: &[f64]) -> (f64, f64) {
    let n = block.len().max(1) as f64;
    let mean = block.iter().sum::<f64>() / n;
    let var = block.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    let inv = 1.0 / sum;
    for w in weights.iter_mut() {
        *w *= inv;
    }
    // Absorb the last rounding ulp so the sum is exact.
    let head: f64 = weights[..weights.len() - 1].iter().sum();
    *weights.last_mut().expect("k >= 1") = 1.0 - head;
}

/// One E-step: fills the responsibility matrix (row-major n x K) and
/// returns the mean log-likelihood of the data under `params`.
fn e_step(data: &[f64], lnx: &[f64], params: &Params, resp: &mut [f64]) -> f64 {
    let k = params.weights.len();
    let consts: Vec<(f64, f64, f64)> = (0..k)
        .map(|j| {
            (
                params.weights[j].ln() + params.shapes[j] * params.rates[j].ln()
                    - super::special::log_gamma_unchecked(params.shapes[j]),
                params.shapes[j] - 1.0,
                params.rates[j],
            )
        })
        .collect();
    let mut total = 0.0;
    for (i, (&x, &lx)) in data.iter().zip(lnx).enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        let mut max = f64::NEG_INFINITY;
        for (r, &(c0, am1, rate)) in row.iter_mut().zip(&consts) {
            *r = c0 + am1 * lx - rate * x;
            if *r > max {
                max = *r;
            }
        }
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            sum += *r;
        }
        total += max + sum.ln();
        let inv = 1.0 / sum;
        for r in row.iter_mut() {
            *r = (*r * inv).max(RESP_FLOOR);
        }
    }
    total / data.len() as f64
}

/// One M-step over a filled responsibility matrix. Returns the index of the
/// first degenerate component on failure.
fn m_step(data: &[f64], resp: &[f64], k: usize) -> Result<Params, usize> {
    let mut mass = vec![0.0; k];
    let mut mean = vec![0.0; k];
    for (i, &x) in data.iter().enumerate() {
        let row = &resp[i * k..(i + 1) * k];
        for j in 0..k {
            mass[j] += row[j];
            mean[j] += row[j] * x;
        }
    }
    for j in 0..k {
        if !(mass[j] > MASS_FLOOR) {
            return Err(j);
        }
        mean[j] /= mass[j];
        if !(mean[j].is_finite() && mean[j] > 0.0) {
            return Err(j);
        }
    }
    let mut var = vec![0.0; k];
    for (i, &x) in data.iter().enumerate() {
        let row = &resp[i * k..(i + 1) * k];
        for j in 0..k {
            let d = x - mean[j];
            var[j] += row[j] * d * d;
        }
    }
    let mut weights = Vec::with_capacity(k);
    let mut shapes = Vec::with_capacity(k);
    let mut rates = Vec::with_capacity(k);
    let total_mass: f64 = mass.iter().sum();
    for j in 0..k {
        var[j] /= mass[j];
        if !var[j].is_finite() {
            return Err(j);
        }
        let (shape, rate) = moment_matched_gamma(mean[j], var[j]);
        if !(shape.is_finite() && rate.is_finite()) {
            return Err(j);
        }
        weights.push(mass[j] / total_mass);
        shapes.push(shape);
        rates.push(rate);
    }
    normalize(&mut weights);
    Ok(Params {
        weights,
        shapes,
        rates,
    })
}

/// Re-initializes one dead component from a random contiguous block of the
/// sorted data.
fn reseed_component(params: &mut Params, j: usize, sorted: &[f64], rng: &mut impl Rng) {
    let n = sorted.len();
    let width = (n / (2 * params.weights.len())).max(2).min(n);
    let start = (rng.random::<f64>() * (n - width) as f64) as usize;
    let (mean, var) = block_moments(&sorted[start..start + width]);
    let (shape, rate) = moment_matched_gamma(mean, var);
    params.shapes[j] = shape;
    params.rates[j] = rate;
    params.weights[j] = 1.0 / params.weights.len() as f64;
    normalize(&mut params.weights);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{sample_mixture, GammaMixture};
    use approx::assert_relative_eq;

    fn sample_stats(data: &[f64]) -> (f64, f64) {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    fn cfg_k(k: usize) -> EmConfig {
        EmConfig {
            k,
            ..EmConfig::default()
        }
    }

    #[test]
    fn single_gamma_recovers_sample_moments_exactly() {
        let truth = GammaMixture::single(2.0, 1.0).unwrap();
        let data = sample_mixture(&truth, 10_000, 42);
        let fit = em_fit(&data, &cfg_k(1)).unwrap();
        assert!(fit.converged);
        let c = fit.mixture.components()[0];
        let (s_mean, s_var) = sample_stats(&data);
        // K=1 moment matching reproduces the sample moments directly.
        assert_relative_eq!(c.mean(), s_mean, max_relative = 1e-10);
        assert_relative_eq!(c.variance(), s_var, max_relative = 1e-9);
        // And therefore lands close to the generator truth.
        assert!((c.mean() - 2.0).abs() / 2.0 < 0.02);
        assert!((c.variance() - 2.0).abs() / 2.0 < 0.05);
    }

    #[test]
    fn single_component_converges_in_one_iteration() {
        let truth = GammaMixture::single(3.0, 0.5).unwrap();
        let data = sample_mixture(&truth, 2_000, 1);
        let fit = em_fit(
            &data,
            &EmConfig {
                k: 1,
                n_restarts: 1,
                ..EmConfig::default()
            },
        )
        .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations(), 1);
        assert_eq!(fit.trace.n, 2_000);
        assert_eq!(fit.trace.k, 1);
    }

    #[test]
    fn two_component_mixture_is_recovered() {
        let truth = GammaMixture::new(vec![
            crate::mixture::GammaComponent {
                weight: 0.4,
                shape: 2.0,
                rate: 4.0,
            },
            crate::mixture::GammaComponent {
                weight: 0.6,
                shape: 20.0,
                rate: 2.0,
            },
        ])
        .unwrap();
        let data = sample_mixture(&truth, 20_000, 5);
        let fit = em_fit(&data, &cfg_k(2)).unwrap();
        let mut comps = fit.mixture.components().to_vec();
        comps.sort_by(|a, b| a.mean().partial_cmp(&b.mean()).unwrap());
        assert!((comps[0].weight - 0.4).abs() < 0.05, "weight {}", comps[0].weight);
        assert!((comps[1].weight - 0.6).abs() < 0.05);
        assert!((comps[0].mean() - 0.5).abs() / 0.5 < 0.05, "mean {}", comps[0].mean());
        assert!((comps[1].mean() - 10.0).abs() / 10.0 < 0.05);
    }

    #[test]
    fn trace_is_monotone_non_decreasing() {
        let truth = GammaMixture::new(vec![
            crate::mixture::GammaComponent {
                weight: 0.3,
                shape: 1.0,
                rate: 1.0,
            },
            crate::mixture::GammaComponent {
                weight: 0.7,
                shape: 30.0,
                rate: 1.5,
            },
        ])
        .unwrap();
        for seed in 0..5 {
            let data = sample_mixture(&truth, 4_000, seed);
            let fit = em_fit(
                &data,
                &EmConfig {
                    k: 3,
                    seed,
                    ..EmConfig::default()
                },
            )
            .unwrap();
            let trace = &fit.trace.mean_log_likelihood;
            for w in trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "trace decreased: {} -> {} (seed {seed})",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn k1_fit_is_permutation_invariant() {
        let truth = GammaMixture::single(4.0, 2.0).unwrap();
        let data = sample_mixture(&truth, 1_000, 9);
        let mut reversed = data.clone();
        reversed.reverse();
        let a = em_fit(&data, &cfg_k(1)).unwrap().mixture.components()[0];
        let b = em_fit(&reversed, &cfg_k(1)).unwrap().mixture.components()[0];
        assert_relative_eq!(a.shape, b.shape, max_relative = 1e-10);
        assert_relative_eq!(a.rate, b.rate, max_relative = 1e-10);
    }

    #[test]
    fn k1_fit_scales_as_gamma_family() {
        let truth = GammaMixture::single(5.0, 1.0).unwrap();
        let data = sample_mixture(&truth, 1_000, 13);
        let scaled: Vec<f64> = data.iter().map(|&x| 3.0 * x).collect();
        let a = em_fit(&data, &cfg_k(1)).unwrap().mixture.components()[0];
        let b = em_fit(&scaled, &cfg_k(1)).unwrap().mixture.components()[0];
        // Shape is scale-free; rate divides by the scale.
        assert_relative_eq!(a.shape, b.shape, max_relative = 1e-10);
        assert_relative_eq!(a.rate / 3.0, b.rate, max_relative = 1e-10);
    }

    #[test]
    fn preconditions_are_enforced() {
        let data = vec![1.0; 100];
        assert!(matches!(
            em_fit(&data, &EmConfig { k: 0, ..EmConfig::default() }),
            Err(EmError::InvalidConfig(_))
        ));
        assert!(matches!(
            em_fit(&data, &EmConfig { epsilon: 0.0, ..EmConfig::default() }),
            Err(EmError::InvalidConfig(_))
        ));
        assert!(matches!(
            em_fit(&data[..30], &cfg_k(4)),
            Err(EmError::InvalidData(_))
        ));
        let mut bad = data.clone();
        bad[7] = -1.0;
        assert!(matches!(em_fit(&bad, &cfg_k(1)), Err(EmError::InvalidData(_))));
    }

    #[test]
    fn unrecoverable_degeneracy_is_reported() {
        // Magnitudes around 1e170 overflow the variance floor (1e-12 mean^2),
        // so the component degenerates, gets one re-seed onto the same data,
        // and then errors out.
        let data = vec![1e170; 50];
        assert_eq!(
            em_fit(&data, &cfg_k(1)).unwrap_err(),
            EmError::DegenerateComponent { component: 0 }
        );
    }

    #[test]
    fn constant_data_fits_a_spike_without_degenerating() {
        let data = vec![2.5; 100];
        let fit = em_fit(&data, &cfg_k(1)).unwrap();
        let c = fit.mixture.components()[0];
        assert_relative_eq!(c.mean(), 2.5, max_relative = 1e-9);
        assert!(c.shape > 1e10, "variance floor should give a huge shape");
    }
}
