//! Dirichlet-process Gamma mixture fitting: the fallback path when the EM
//! fit fails its goodness-of-fit test.
//!
//! A Chinese-restaurant-process Gibbs sampler with auxiliary slots for the
//! non-conjugate Gamma likelihood: cluster assignments are resampled
//! point-by-point against existing clusters plus freshly drawn candidate
//! parameters, and each cluster's (log shape, log rate) is then moved by a
//! random-walk Metropolis step. The reported mixture is the posterior-mode
//! partition (highest joint log posterior over sampling sweeps), converted
//! to Gamma components by within-cluster moment matching, truncated to
//! clusters holding at least 1% of the data, and re-normalized.

use crate::mixture::special::log_gamma_unchecked;
use crate::mixture::{moment_matched_gamma, GammaComponent, GammaMixture, MixtureError};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;

/// Minimum occupancy fraction for a cluster to appear in the output.
const OCCUPANCY_FLOOR: f64 = 0.01;

/// Standard deviation of the base measure over (log shape, log rate),
/// centered on the whole-data moment match.
const BASE_MEASURE_SD: f64 = 3.0;

/// Sampler configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    /// Dirichlet-process concentration, > 0; smaller favors fewer clusters.
    pub concentration: f64,
    /// Cap on reported components; the largest-weight clusters win.
    pub max_components: usize,
    /// Full Gibbs sweeps discarded before mode tracking starts.
    pub n_burnin: usize,
    /// Full Gibbs sweeps scanned for the posterior mode.
    pub n_samples: usize,
    /// Random-walk standard deviation in (log shape, log rate) space.
    pub proposal_sd: f64,
    /// Auxiliary candidate slots per assignment draw, >= 1.
    pub aux_components: usize,
    pub seed: u64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            concentration: 1.0,
            max_components: 16,
            n_burnin: 2000,
            n_samples: 2000,
            proposal_sd: 0.25,
            aux_components: 3,
            seed: 0,
        }
    }
}

impl DpConfig {
    fn validate(&self) -> Result<(), DpError> {
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(DpError::InvalidConfig(format!(
                "concentration must be > 0, got {}",
                self.concentration
            )));
        }
        if !(self.proposal_sd.is_finite() && self.proposal_sd > 0.0) {
            return Err(DpError::InvalidConfig(format!(
                "proposal_sd must be > 0, got {}",
                self.proposal_sd
            )));
        }
        if self.max_components < 1
            || self.n_burnin < 1
            || self.n_samples < 1
            || self.aux_components < 1
        {
            return Err(DpError::InvalidConfig(
                "max_components, n_burnin, n_samples, aux_components must all be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sampler diagnostics for auditing mixing behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct DpDiagnostics {
    /// Fraction of accepted parameter moves across the whole run.
    pub acceptance_rate: f64,
    /// Active-cluster count after every sweep, burn-in included.
    pub active_clusters_trace: Vec<usize>,
    /// Joint log posterior of the reported mode partition.
    pub mode_log_posterior: f64,
    /// Sampling sweep (0-based, post-burn-in) where the mode was found.
    pub mode_sweep: usize,
}

/// A fitted mixture with its sampler diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DpFit {
    pub mixture: GammaMixture,
    pub diagnostics: DpDiagnostics,
}

/// Errors from DPGMM fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum DpError {
    InvalidConfig(String),
    /// Data too short or containing non-positive/non-finite values.
    InvalidData(String),
    /// Fewer than 2 distinct values; no mixture structure to infer.
    DegenerateData,
    Mixture(MixtureError),
}

impl fmt::Display for DpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig(msg) => write!(f, "invalid sampler config: {msg}"),
            Self::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Self::DegenerateData => {
                write!(f, "data has fewer than 2 distinct values; nothing to fit")
            }
            Self::Mixture(e) => write!(f, "mixture assembly failed: {e}"),
        }
    }
}

impl std::error::Error for DpError {}

impl From<MixtureError> for DpError {
    fn from(e: MixtureError) -> Self {
        Self::Mixture(e)
    }
}

/// Cluster parameters in log space with cached likelihood constants.
#[derive(Debug, Clone, Copy)]
struct Params {
    log_shape: f64,
    log_rate: f64,
    /// shape * ln(rate) - lnGamma(shape), the per-point constant.
    point_const: f64,
    shape_m1: f64,
    rate: f64,
}

impl Params {
    fn new(log_shape: f64, log_rate: f64) -> Self {
        let shape = log_shape.exp();
        let rate = log_rate.exp();
        Self {
            log_shape,
            log_rate,
            point_const: shape * rate.ln() - log_gamma_unchecked(shape),
            shape_m1: shape - 1.0,
            rate,
        }
    }

    /// Log density of one observation under these parameters.
    fn log_pdf(&self, x: f64, ln_x: f64) -> f64 {
        self.point_const + self.shape_m1 * ln_x - self.rate * x
    }

    /// Log likelihood of a whole cluster from its sufficient statistics.
    fn log_lik(&self, n: f64, sum_x: f64, sum_ln_x: f64) -> f64 {
        n * self.point_const + self.shape_m1 * sum_ln_x - self.rate * sum_x
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    params: Params,
    n: usize,
    sum_x: f64,
    sum_ln_x: f64,
}

struct Sampler<'a> {
    data: &'a [f64],
    ln_data: Vec<f64>,
    assignments: Vec<usize>,
    clusters: Vec<Cluster>,
    base_center: (f64, f64),
    cfg: DpConfig,
    proposals: u64,
    accepts: u64,
}

/// Log density of the base measure at (log shape, log rate), normalization
/// included so posteriors with different cluster counts stay comparable.
fn log_prior(center: (f64, f64), log_shape: f64, log_rate: f64) -> f64 {
    let norm = -(BASE_MEASURE_SD * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let za = (log_shape - center.0) / BASE_MEASURE_SD;
    let zb = (log_rate - center.1) / BASE_MEASURE_SD;
    2.0 * norm - 0.5 * (za * za + zb * zb)
}

impl<'a> Sampler<'a> {
    fn new(data: &'a [f64], cfg: DpConfig) -> Self {
        let ln_data: Vec<f64> = data.iter().map(|&x| x.ln()).collect();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n;
        let (shape, rate) = moment_matched_gamma(mean, var);
        let base_center = (shape.ln(), rate.ln());
        // Everyone starts in one cluster at the whole-data moment match.
        let clusters = vec![Cluster {
            params: Params::new(base_center.0, base_center.1),
            n: data.len(),
            sum_x: data.iter().sum(),
            sum_ln_x: ln_data.iter().sum(),
        }];
        Self {
            assignments: vec![0; data.len()],
            data,
            ln_data,
            clusters,
            base_center,
            cfg,
            proposals: 0,
            accepts: 0,
        }
    }

    fn draw_from_base(&self, rng: &mut impl Rng) -> Params {
        let za: f64 = rng.sample(StandardNormal);
        let zb: f64 = rng.sample(StandardNormal);
        Params::new(
            self.base_center.0 + BASE_MEASURE_SD * za,
            self.base_center.1 + BASE_MEASURE_SD * zb,
        )
    }

    /// Rebuilds every cluster's sufficient statistics exactly, clearing the
    /// drift that incremental removal/insertion accumulates within sweeps.
    fn rebuild_stats(&mut self) {
        for c in &mut self.clusters {
            c.n = 0;
            c.sum_x = 0.0;
            c.sum_ln_x = 0.0;
        }
        for (i, &z) in self.assignments.iter().enumerate() {
            let c = &mut self.clusters[z];
            c.n += 1;
            c.sum_x += self.data[i];
            c.sum_ln_x += self.ln_data[i];
        }
    }

    /// One full assignment sweep with auxiliary-slot candidate parameters.
    fn sweep_assignments(&mut self, rng: &mut impl Rng) {
        let m = self.cfg.aux_components;
        let log_aux_mass = (self.cfg.concentration / m as f64).ln();
        let mut weights: Vec<f64> = Vec::new();
        let mut aux: Vec<Params> = Vec::with_capacity(m);
        for i in 0..self.data.len() {
            let (x, ln_x) = (self.data[i], self.ln_data[i]);
            let old = self.assignments[i];

            // Detach the point; a cluster it leaves empty donates its
            // parameters to the first auxiliary slot and disappears.
            let mut orphan: Option<Params> = None;
            {
                let c = &mut self.clusters[old];
                c.n -= 1;
                c.sum_x -= x;
                c.sum_ln_x -= ln_x;
            }
            if self.clusters[old].n == 0 {
                orphan = Some(self.clusters[old].params);
                self.clusters.swap_remove(old);
                let moved = self.clusters.len();
                if old < moved {
                    for z in &mut self.assignments {
                        if *z == moved {
                            *z = old;
                        }
                    }
                }
            }

            aux.clear();
            for j in 0..m {
                match (j, orphan) {
                    (0, Some(p)) => aux.push(p),
                    _ => aux.push(self.draw_from_base(rng)),
                }
            }

            weights.clear();
            let mut max_w = f64::NEG_INFINITY;
            for c in &self.clusters {
                let w = (c.n as f64).ln() + c.params.log_pdf(x, ln_x);
                max_w = max_w.max(w);
                weights.push(w);
            }
            for p in &aux {
                let w = log_aux_mass + p.log_pdf(x, ln_x);
                max_w = max_w.max(w);
                weights.push(w);
            }

            let mut total = 0.0;
            for w in &mut weights {
                *w = (*w - max_w).exp();
                total += *w;
            }
            let mut u: f64 = rng.random::<f64>() * total;
            let mut choice = weights.len() - 1;
            for (idx, &w) in weights.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    choice = idx;
                    break;
                }
            }

            let target = if choice < self.clusters.len() {
                choice
            } else {
                self.clusters.push(Cluster {
                    params: aux[choice - self.clusters.len()],
                    n: 0,
                    sum_x: 0.0,
                    sum_ln_x: 0.0,
                });
                self.clusters.len() - 1
            };
            let c = &mut self.clusters[target];
            c.n += 1;
            c.sum_x += x;
            c.sum_ln_x += ln_x;
            self.assignments[i] = target;
        }
    }

    /// Random-walk Metropolis moves on every cluster's parameters.
    fn sweep_params(&mut self, rng: &mut impl Rng) {
        for c in &mut self.clusters {
            let cur = c.params;
            let za: f64 = rng.sample(StandardNormal);
            let zb: f64 = rng.sample(StandardNormal);
            let prop = Params::new(
                cur.log_shape + self.cfg.proposal_sd * za,
                cur.log_rate + self.cfg.proposal_sd * zb,
            );
            let (n, sx, slx) = (c.n as f64, c.sum_x, c.sum_ln_x);
            let log_ratio = prop.log_lik(n, sx, slx) - cur.log_lik(n, sx, slx)
                + log_prior(self.base_center, prop.log_shape, prop.log_rate)
                - log_prior(self.base_center, cur.log_shape, cur.log_rate);
            self.proposals += 1;
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                c.params = prop;
                self.accepts += 1;
            }
        }
    }

    /// Joint log posterior of the current state: CRP partition mass (the
    /// concentration-independent rising factorial dropped) plus per-cluster
    /// prior and likelihood.
    fn log_posterior(&self) -> f64 {
        let mut lp = self.clusters.len() as f64 * self.cfg.concentration.ln();
        for c in &self.clusters {
            lp += log_gamma_unchecked(c.n as f64); // ln (n_c - 1)!
            lp += log_prior(self.base_center, c.params.log_shape, c.params.log_rate);
            lp += c.params.log_lik(c.n as f64, c.sum_x, c.sum_ln_x);
        }
        lp
    }
}

/// Converts a partition snapshot into a mixture: per-cluster moment match
/// with occupancy weights, truncated at the occupancy floor, re-normalized,
/// capped at `max_components`, ordered by descending weight.
fn summarize(
    data: &[f64],
    assignments: &[usize],
    n_clusters: usize,
    max_components: usize,
) -> Result<GammaMixture, DpError> {
    let n = data.len();
    let mut counts = vec![0usize; n_clusters];
    let mut sums = vec![0.0f64; n_clusters];
    for (i, &z) in assignments.iter().enumerate() {
        counts[z] += 1;
        sums[z] += data[i];
    }
    let mut sq = vec![0.0f64; n_clusters];
    for (i, &z) in assignments.iter().enumerate() {
        let d = data[i] - sums[z] / counts[z] as f64;
        sq[z] += d * d;
    }
    let mut kept: Vec<(usize, f64, f64)> = (0..n_clusters)
        .filter(|&c| counts[c] > 0 && counts[c] as f64 >= OCCUPANCY_FLOOR * n as f64)
        .map(|c| {
            let mean = sums[c] / counts[c] as f64;
            let var = sq[c] / counts[c] as f64;
            (counts[c], mean, var)
        })
        .collect();
    if kept.is_empty() {
        // Reachable only past 100 active clusters (pigeonhole); fall back
        // to the single largest.
        let c = (0..n_clusters).max_by_key(|&c| counts[c]).expect("n_clusters >= 1");
        let mean = sums[c] / counts[c] as f64;
        kept.push((counts[c], mean, sq[c] / counts[c] as f64));
    }
    kept.sort_by(|a, b| b.0.cmp(&a.0));
    kept.truncate(max_components);
    let total: usize = kept.iter().map(|k| k.0).sum();
    let mut comps: Vec<GammaComponent> = Vec::with_capacity(kept.len());
    let mut head = 0.0;
    for (i, &(count, mean, var)) in kept.iter().enumerate() {
        let (shape, rate) = moment_matched_gamma(mean, var);
        let weight = if i + 1 == kept.len() {
            1.0 - head
        } else {
            let w = count as f64 / total as f64;
            head += w;
            w
        };
        comps.push(GammaComponent {
            weight,
            shape,
            rate,
        });
    }
    Ok(GammaMixture::new(comps)?)
}

/// Fits a Gamma mixture by Dirichlet-process sampling.
///
/// Deterministic per seed: identical data and config give an identical
/// mixture and diagnostics.
///
/// # Errors
///
/// [`DpError::InvalidData`] for fewer than 50 points or non-positive
/// values; [`DpError::DegenerateData`] for fewer than 2 distinct values;
/// [`DpError::InvalidConfig`] for out-of-domain settings.
pub fn dpgmm_fit(data: &[f64], cfg: &DpConfig) -> Result<DpFit, DpError> {
    cfg.validate()?;
    if data.len() < 50 {
        return Err(DpError::InvalidData(format!(
            "need at least 50 samples, got {}",
            data.len()
        )));
    }
    if let Some(i) = data.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(DpError::InvalidData(format!(
            "sample at index {i} is not finite and positive ({})",
            data[i]
        )));
    }
    let first = data[0];
    if data.iter().all(|&x| x == first) {
        return Err(DpError::DegenerateData);
    }

    let mut rng = crate::stream_rng(cfg.seed, 0x6470);
    let mut sampler = Sampler::new(data, *cfg);
    let total_sweeps = cfg.n_burnin + cfg.n_samples;
    let mut trace = Vec::with_capacity(total_sweeps);
    let mut mode_lp = f64::NEG_INFINITY;
    let mut mode_sweep = 0usize;
    let mut mode_assignments: Vec<usize> = sampler.assignments.clone();
    let mut mode_n_clusters = sampler.clusters.len();

    for sweep in 0..total_sweeps {
        sampler.rebuild_stats();
        sampler.sweep_assignments(&mut rng);
        sampler.sweep_params(&mut rng);
        trace.push(sampler.clusters.len());
        if sweep >= cfg.n_burnin {
            let lp = sampler.log_posterior();
            if lp > mode_lp {
                mode_lp = lp;
                mode_sweep = sweep - cfg.n_burnin;
                mode_assignments.clone_from(&sampler.assignments);
                mode_n_clusters = sampler.clusters.len();
            }
        }
    }

    let mixture = summarize(data, &mode_assignments, mode_n_clusters, cfg.max_components)?;
    Ok(DpFit {
        mixture,
        diagnostics: DpDiagnostics {
            acceptance_rate: sampler.accepts as f64 / sampler.proposals.max(1) as f64,
            active_clusters_trace: trace,
            mode_log_posterior: mode_lp,
            mode_sweep,
        },
    })
}
