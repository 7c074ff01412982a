//! Batch orchestration: sweeps (synthesized over a scenario grid or
//! ingested from files) through response extraction, SNR derivation,
//! mixture fitting with goodness-of-fit gating, and capacity evaluation,
//! with every artifact written under one output directory per setting.
//!
//! Per-setting failures are recorded in the batch summary and do not abort
//! the remaining settings. All per-setting randomness is derived from the
//! master seed and the setting index, so worker scheduling cannot change
//! any output byte.

use crate::capacity::{capacity_quadrature, CapacityError, CapacityResult};
use crate::dpgmm::{dpgmm_fit, DpConfig, DpError, DpFit};
use crate::dsp::{
    frequency_response_db, impulse_response, peak_power_db, Window, DB_SENTINEL,
};
use crate::gof::{ks_test, GofError, KsResult};
use crate::mixture::em::{em_fit, EmConfig, EmError, EmFit};
use crate::mixture::{mean_log_likelihood, GammaMixture, MixtureError};
use crate::snr::{snr_samples, write_snr_samples, NoiseConfig, SnrError};
use crate::sweep::{parse_sweep, write_sweep, ScenarioMeta, Sweep, SweepError};
use crate::synth::{parse_link_model, synth_sweep, GridSpec, LinkModel, SynthError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Which fitter handles a setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMethod {
    /// Expectation maximization only; no fallback on KS failure.
    Em,
    /// Dirichlet-process sampling only.
    Dpgmm,
    /// EM first; refit with the Dirichlet process when EM fails the KS
    /// test.
    #[default]
    Auto,
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Em => "em",
            Self::Dpgmm => "dpgmm",
            Self::Auto => "auto",
        })
    }
}

impl FromStr for FitMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "em" => Ok(Self::Em),
            "dpgmm" => Ok(Self::Dpgmm),
            "auto" => Ok(Self::Auto),
            other => Err(format!("unknown method '{other}', expected em|dpgmm|auto")),
        }
    }
}

/// Which fitter actually produced a reported mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Em,
    Dpgmm,
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Em => "em",
            Self::Dpgmm => "dpgmm",
        })
    }
}

/// Where the batch gets its sweeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSpec {
    /// Synthesize the full distance x angle grid from the link model.
    Synth,
    /// Read every `*.txt` sweep file in a directory, one setting per file.
    Ingest(PathBuf),
}

/// Full batch configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: InputSpec,
    /// Synthesis grid distances in meters.
    pub distances_m: Vec<f64>,
    /// Synthesis grid misalignment angles in degrees.
    pub angles_deg: Vec<f64>,
    /// Transmit power stamped into synthesized scenarios.
    pub p_tx_dbm: f64,
    pub grid: GridSpec,
    pub link: LinkModel,
    pub noise: NoiseConfig,
    pub window: Window,
    pub method: FitMethod,
    /// KS pass threshold on the p-value.
    pub threshold: f64,
    pub em: EmConfig,
    pub dp: DpConfig,
    /// Master seed; every per-setting stage seed derives from it.
    pub seed: u64,
    /// Worker threads; 0 uses the process-wide default.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputSpec::Synth,
            distances_m: (2..=10).map(|d| d as f64 / 10.0).collect(),
            angles_deg: (0..=6).map(|a| (a * 5) as f64).collect(),
            p_tx_dbm: 0.0,
            grid: GridSpec::default(),
            link: LinkModel::default(),
            noise: NoiseConfig::default(),
            window: Window::Rect,
            method: FitMethod::Auto,
            threshold: 0.005,
            em: EmConfig::default(),
            dp: DpConfig::default(),
            seed: 0,
            jobs: 0,
        }
    }
}

impl PipelineConfig {
    /// Checks the grid and threshold domains and that synth settings are
    /// distinct.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PipelineError::Config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.input == InputSpec::Synth {
            if self.distances_m.is_empty() || self.angles_deg.is_empty() {
                return Err(PipelineError::Config(
                    "synthesis needs at least one distance and one angle".into(),
                ));
            }
            for &d in &self.distances_m {
                if !(d.is_finite() && d > 0.0) {
                    return Err(PipelineError::Config(format!(
                        "distance {d} must be positive and finite"
                    )));
                }
            }
            for &a in &self.angles_deg {
                if !(a.is_finite() && (0.0..90.0).contains(&a)) {
                    return Err(PipelineError::Config(format!(
                        "angle {a} must lie in [0, 90)"
                    )));
                }
            }
            let mut pairs: Vec<(u64, u64)> = self
                .distances_m
                .iter()
                .flat_map(|&d| self.angles_deg.iter().map(move |&a| (d.to_bits(), a.to_bits())))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            if pairs.len() != self.distances_m.len() * self.angles_deg.len() {
                return Err(PipelineError::Config(
                    "synthesis grid contains duplicate (distance, angle) settings".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Errors from orchestration. Per-setting errors are carried as
/// [`SettingFailure`] records instead, so one bad setting cannot abort the
/// batch.
#[derive(Debug)]
pub enum PipelineError {
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
    Sweep(SweepError),
    Synth(SynthError),
    Snr(SnrError),
    Em(EmError),
    Dp(DpError),
    Gof(GofError),
    Capacity(CapacityError),
    Mixture(MixtureError),
    Serde(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "config error: {msg}"),
            Self::Io { path, source } => write!(f, "io error at {}: {source}", path.display()),
            Self::Sweep(e) => write!(f, "sweep error: {e}"),
            Self::Synth(e) => write!(f, "synthesis error: {e}"),
            Self::Snr(e) => write!(f, "snr error: {e}"),
            Self::Em(e) => write!(f, "em error: {e}"),
            Self::Dp(e) => write!(f, "dpgmm error: {e}"),
            Self::Gof(e) => write!(f, "ks error: {e}"),
            Self::Capacity(e) => write!(f, "capacity error: {e}"),
            Self::Mixture(e) => write!(f, "mixture error: {e}"),
            Self::Serde(msg) => write!(f, "serialization error: {msg}"),
        }
    }
}

impl std::error::Error for PipelineError {}

macro_rules! from_err {
    ($variant:ident, $ty:ty) => {
        impl From<$ty> for PipelineError {
            fn from(e: $ty) -> Self {
                Self::$variant(e)
            }
        }
    };
}

from_err!(Sweep, SweepError);
from_err!(Synth, SynthError);
from_err!(Snr, SnrError);
from_err!(Em, EmError);
from_err!(Dp, DpError);
from_err!(Gof, GofError);
from_err!(Capacity, CapacityError);
from_err!(Mixture, MixtureError);

/// Fit-stage configuration: which fitter(s) to run and how.
#[derive(Debug, Clone, PartialEq)]
pub struct FitStageConfig {
    pub method: FitMethod,
    /// KS pass threshold on the p-value.
    pub threshold: f64,
    pub em: EmConfig,
    pub dp: DpConfig,
}

/// One fitter attempt with its goodness-of-fit verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct EmAttempt {
    pub fit: EmFit,
    pub ks: KsResult,
}

/// See [`EmAttempt`].
#[derive(Debug, Clone, PartialEq)]
pub struct DpAttempt {
    pub fit: DpFit,
    pub ks: KsResult,
}

/// Everything the fit stage produced; `method` names the authoritative
/// attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub method: MethodTag,
    pub em: Option<EmAttempt>,
    pub dp: Option<DpAttempt>,
}

impl FitOutcome {
    /// The mixture selected for reporting.
    pub fn mixture(&self) -> &GammaMixture {
        match self.method {
            MethodTag::Em => &self.em.as_ref().expect("em outcome present").fit.mixture,
            MethodTag::Dpgmm => &self.dp.as_ref().expect("dp outcome present").fit.mixture,
        }
    }

    /// KS verdict of the selected mixture.
    pub fn ks(&self) -> &KsResult {
        match self.method {
            MethodTag::Em => &self.em.as_ref().expect("em outcome present").ks,
            MethodTag::Dpgmm => &self.dp.as_ref().expect("dp outcome present").ks,
        }
    }

    /// Whether the EM attempt converged; `None` when EM never ran.
    pub fn em_converged(&self) -> Option<bool> {
        self.em.as_ref().map(|a| a.fit.converged)
    }
}

/// Runs the configured fitter(s) on SNR samples and applies the KS gate.
///
/// In auto mode the Dirichlet-process refit triggers if and only if the EM
/// mixture fails the KS test; the returned method tag records which fit is
/// authoritative.
///
/// # Errors
///
/// Propagated fitter and test errors ([`PipelineError::Em`],
/// [`PipelineError::Dp`], [`PipelineError::Gof`]).
pub fn fit_stage(samples: &[f64], cfg: &FitStageConfig) -> Result<FitOutcome, PipelineError> {
    let run_em = |out: &mut FitOutcome| -> Result<bool, PipelineError> {
        let fit = em_fit(samples, &cfg.em)?;
        let ks = ks_test(samples, &fit.mixture, cfg.threshold)?;
        let pass = ks.pass;
        out.em = Some(EmAttempt { fit, ks });
        Ok(pass)
    };
    let run_dp = |out: &mut FitOutcome| -> Result<(), PipelineError> {
        let fit = dpgmm_fit(samples, &cfg.dp)?;
        let ks = ks_test(samples, &fit.mixture, cfg.threshold)?;
        out.dp = Some(DpAttempt { fit, ks });
        Ok(())
    };
    let mut out = FitOutcome {
        method: MethodTag::Em,
        em: None,
        dp: None,
    };
    match cfg.method {
        FitMethod::Em => {
            run_em(&mut out)?;
        }
        FitMethod::Dpgmm => {
            run_dp(&mut out)?;
            out.method = MethodTag::Dpgmm;
        }
        FitMethod::Auto => {
            let passed = run_em(&mut out)?;
            if !passed {
                run_dp(&mut out)?;
                out.method = MethodTag::Dpgmm;
            }
        }
    }
    Ok(out)
}

/// Serialized form of one fitter attempt: ordered components, fit quality,
/// and (for the sampler) its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: MethodTag,
    pub components: GammaMixture,
    /// Mean log-likelihood of the recorded mixture on the fitted data.
    pub final_mean_log_likelihood: f64,
    /// EM iterations, or total sampler sweeps for the Dirichlet process.
    pub iterations: usize,
    /// EM convergence flag; `null` for the sampler, which has no epsilon
    /// criterion.
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_clusters_trace: Option<Vec<usize>>,
}

impl FitRecord {
    /// Record of an EM attempt.
    pub fn from_em(fit: &EmFit) -> Self {
        Self {
            method: MethodTag::Em,
            components: fit.mixture.clone(),
            final_mean_log_likelihood: fit.final_mean_log_likelihood(),
            iterations: fit.iterations(),
            converged: Some(fit.converged),
            acceptance_rate: None,
            active_clusters_trace: None,
        }
    }

    /// Record of a Dirichlet-process attempt; the likelihood is evaluated
    /// on the data the sampler saw.
    pub fn from_dp(fit: &DpFit, data: &[f64], cfg: &DpConfig) -> Result<Self, MixtureError> {
        Ok(Self {
            method: MethodTag::Dpgmm,
            components: fit.mixture.clone(),
            final_mean_log_likelihood: mean_log_likelihood(data, &fit.mixture)?,
            iterations: cfg.n_burnin + cfg.n_samples,
            converged: None,
            acceptance_rate: Some(fit.diagnostics.acceptance_rate),
            active_clusters_trace: Some(fit.diagnostics.active_clusters_trace.clone()),
        })
    }
}

/// Complete per-setting result, serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub meta: ScenarioMeta,
    pub method: MethodTag,
    pub mixture: GammaMixture,
    pub ks: KsResult,
    /// `null` when EM never ran (method override to dpgmm).
    pub em_converged: Option<bool>,
    pub capacity: CapacityResult,
    /// The KS test reuses the samples the mixture was fitted on, which
    /// biases p-values optimistically; flagged so consumers can tell.
    pub fitted_on_same_data: bool,
    pub window: String,
    pub noise: NoiseConfig,
    /// SNR sample count the fit used.
    pub n_samples: usize,
    /// Zero-magnitude points dropped during SNR derivation.
    pub dropped: usize,
    pub peak_delay_s: f64,
    pub peak_power_db: f64,
}

/// One setting that could not produce a report.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingFailure {
    pub setting: String,
    pub error: String,
}

/// Result of a batch run.
#[derive(Debug)]
pub struct BatchOutcome {
    /// Successful reports in deterministic setting order.
    pub reports: Vec<FitReport>,
    /// Settings that failed, with their error text.
    pub failures: Vec<SettingFailure>,
    pub summary: ReportSummary,
}

/// Aggregated batch views.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    /// `label,distance_m,angle_deg,method,capacity_bits_per_s,est_abs_error`
    /// rows.
    pub capacity_csv: String,
    /// Plot-ready capacity matrix: distances down, angles across.
    pub capacity_matrix_csv: String,
    /// Human-readable table plus the pass-rate line.
    pub text: String,
    pub n_pass: usize,
    pub n_total: usize,
}

impl ReportSummary {
    /// KS pass rate in percent; 0 for an empty batch.
    pub fn pass_rate_percent(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            100.0 * self.n_pass as f64 / self.n_total as f64
        }
    }
}

/// Builds the batch summary views from finished reports.
pub fn report_summary(reports: &[FitReport], failures: &[SettingFailure]) -> ReportSummary {
    let mut capacity_csv =
        String::from("label,distance_m,angle_deg,method,capacity_bits_per_s,est_abs_error\n");
    for r in reports {
        capacity_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.meta.label,
            r.meta.distance_m,
            r.meta.angle_deg,
            r.method,
            r.capacity.capacity_bits_per_s,
            r.capacity.est_abs_error
        ));
    }

    let mut distances: Vec<f64> = reports.iter().map(|r| r.meta.distance_m).collect();
    distances.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    distances.dedup();
    let mut angles: Vec<f64> = reports.iter().map(|r| r.meta.angle_deg).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    angles.dedup();
    let mut matrix = String::from("distance_m");
    for a in &angles {
        matrix.push_str(&format!(",{a}"));
    }
    matrix.push('\n');
    for &d in &distances {
        matrix.push_str(&format!("{d}"));
        for &a in &angles {
            let cell = reports
                .iter()
                .find(|r| r.meta.distance_m == d && r.meta.angle_deg == a)
                .map(|r| r.capacity.capacity_bits_per_s.to_string())
                .unwrap_or_default();
            matrix.push_str(&format!(",{cell}"));
        }
        matrix.push('\n');
    }

    let n_pass = reports.iter().filter(|r| r.ks.pass).count();
    let n_total = reports.len();
    let label_w = reports
        .iter()
        .map(|r| r.meta.label.len())
        .chain(std::iter::once("label".len()))
        .max()
        .unwrap_or(5);
    let mut text = format!(
        "{:<label_w$}  {:>10}  {:>9}  {:>6}  {:>4}  {:>12}  {:>14}\n",
        "label", "distance_m", "angle_deg", "method", "ks", "p_value", "capacity_gbps"
    );
    for r in reports {
        text.push_str(&format!(
            "{:<label_w$}  {:>10}  {:>9}  {:>6}  {:>4}  {:>12.6}  {:>14.3}\n",
            r.meta.label,
            r.meta.distance_m,
            r.meta.angle_deg,
            r.method.to_string(),
            if r.ks.pass { "pass" } else { "FAIL" },
            r.ks.p_value,
            r.capacity.capacity_bits_per_s / 1e9,
        ));
    }
    for f in failures {
        text.push_str(&format!("{:<label_w$}  ERROR: {}\n", f.setting, f.error));
    }
    let rate = if n_total == 0 {
        0.0
    } else {
        100.0 * n_pass as f64 / n_total as f64
    };
    text.push_str(&format!(
        "{n_pass}/{n_total} fits passed: {rate:.0}% success rate in passing the KS test\n"
    ));

    ReportSummary {
        capacity_csv,
        capacity_matrix_csv: matrix,
        text,
        n_pass,
        n_total,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, PipelineError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| PipelineError::Serde(e.to_string()))
}

/// CSV of an impulse response: `delay_s,re,im,power_db` per tap.
pub fn cir_csv(ir: &crate::dsp::ImpulseResponse) -> String {
    let mut out = String::from("delay_s,re,im,power_db\n");
    for (d, t) in ir.delays_s().iter().zip(ir.taps()) {
        let p = t.norm_sqr();
        let db = if p == 0.0 {
            DB_SENTINEL
        } else {
            10.0 * p.log10()
        };
        out.push_str(&format!("{},{},{},{}\n", d, t.re, t.im, db));
    }
    out
}

/// CSV of a frequency response: `freq_hz,magnitude_db` per point.
pub fn cfr_csv(sweep: &Sweep) -> String {
    let mut out = String::from("freq_hz,magnitude_db\n");
    for (f, db) in frequency_response_db(sweep) {
        out.push_str(&format!("{f},{db}\n"));
    }
    out
}

enum SettingSource {
    Synth(ScenarioMeta),
    File(PathBuf),
}

struct SettingJob {
    index: u64,
    dir_name: String,
    source: SettingSource,
}

fn setting_jobs(cfg: &PipelineConfig) -> Result<Vec<SettingJob>, PipelineError> {
    match &cfg.input {
        InputSpec::Synth => {
            let mut jobs = Vec::new();
            for &d in &cfg.distances_m {
                for &a in &cfg.angles_deg {
                    let label = format!("d{d}m_a{a}deg");
                    let meta = ScenarioMeta::new(d, a, cfg.p_tx_dbm, &label)?;
                    jobs.push(SettingJob {
                        index: jobs.len() as u64,
                        dir_name: label,
                        source: SettingSource::Synth(meta),
                    });
                }
            }
            Ok(jobs)
        }
        InputSpec::Ingest(dir) => {
            let entries = fs::read_dir(dir).map_err(|source| PipelineError::Io {
                path: dir.clone(),
                source,
            })?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(PipelineError::Config(format!(
                    "no .txt sweep files found in {}",
                    dir.display()
                )));
            }
            Ok(paths
                .into_iter()
                .enumerate()
                .map(|(i, p)| SettingJob {
                    index: i as u64,
                    dir_name: p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| format!("setting{i}")),
                    source: SettingSource::File(p),
                })
                .collect())
        }
    }
}

fn process_setting(
    cfg: &PipelineConfig,
    job: &SettingJob,
    out_dir: &Path,
) -> Result<FitReport, PipelineError> {
    let sweep = match &job.source {
        SettingSource::Synth(meta) => synth_sweep(
            meta,
            &cfg.grid,
            &cfg.link,
            crate::mix_seed(cfg.seed, job.index << 3),
        )?,
        SettingSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            parse_sweep(&text)?
        }
    };
    let setting_dir = out_dir.join(&job.dir_name);
    fs::create_dir_all(&setting_dir).map_err(|source| PipelineError::Io {
        path: setting_dir.clone(),
        source,
    })?;
    write_file(&setting_dir.join("sweep.txt"), &write_sweep(&sweep))?;

    let ir = impulse_response(&sweep, cfg.window);
    let (peak_delay_s, peak_power_db) = peak_power_db(&ir);
    write_file(&setting_dir.join("cir.csv"), &cir_csv(&ir))?;
    write_file(&setting_dir.join("cfr.csv"), &cfr_csv(&sweep))?;

    let snr = snr_samples(&sweep, &cfg.noise)?;
    write_file(&setting_dir.join("snr.txt"), &write_snr_samples(&snr))?;

    let mut em = cfg.em.clone();
    em.seed = crate::mix_seed(cfg.seed, (job.index << 3) | 1);
    let mut dp = cfg.dp;
    dp.seed = crate::mix_seed(cfg.seed, (job.index << 3) | 2);
    let stage = FitStageConfig {
        method: cfg.method,
        threshold: cfg.threshold,
        em,
        dp,
    };
    let outcome = fit_stage(snr.samples(), &stage)?;
    if let Some(a) = &outcome.em {
        write_file(
            &setting_dir.join("fit_em.json"),
            &to_json(&FitRecord::from_em(&a.fit))?,
        )?;
    }
    if let Some(a) = &outcome.dp {
        write_file(
            &setting_dir.join("fit_dpgmm.json"),
            &to_json(&FitRecord::from_dp(&a.fit, snr.samples(), &dp)?)?,
        )?;
    }

    let capacity = capacity_quadrature(outcome.mixture(), cfg.noise.bandwidth_hz)?;
    let report = FitReport {
        meta: sweep.meta().clone(),
        method: outcome.method,
        mixture: outcome.mixture().clone(),
        ks: *outcome.ks(),
        em_converged: outcome.em_converged(),
        capacity,
        fitted_on_same_data: true,
        window: cfg.window.to_string(),
        noise: cfg.noise,
        n_samples: snr.len(),
        dropped: snr.dropped(),
        peak_delay_s,
        peak_power_db,
    };
    write_file(&setting_dir.join("report.json"), &to_json(&report)?)?;
    Ok(report)
}

/// Runs the full batch and writes all artifacts under `out_dir`.
///
/// Settings run on a worker pool (`cfg.jobs` threads, 0 for the default);
/// results are deterministic regardless of scheduling because every stage
/// seed is derived from the master seed and setting index.
///
/// # Errors
///
/// [`PipelineError`] only for batch-level problems (bad config, unreadable
/// input directory, unwritable output root). Per-setting errors land in
/// [`BatchOutcome::failures`].
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<BatchOutcome, PipelineError> {
    cfg.validate()?;
    let jobs = setting_jobs(cfg)?;
    fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_file(&out_dir.join("config.txt"), &write_pipeline_config(cfg))?;

    let run = || -> Vec<Result<FitReport, SettingFailure>> {
        jobs.par_iter()
            .map(|job| {
                process_setting(cfg, job, out_dir).map_err(|e| SettingFailure {
                    setting: job.dir_name.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    };
    let results = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(report) => reports.push(report),
            Err(failure) => failures.push(failure),
        }
    }
    let summary = report_summary(&reports, &failures);
    write_file(&out_dir.join("capacity.csv"), &summary.capacity_csv)?;
    write_file(
        &out_dir.join("capacity_matrix.csv"),
        &summary.capacity_matrix_csv,
    )?;
    write_file(&out_dir.join("summary.txt"), &summary.text)?;
    Ok(BatchOutcome {
        reports,
        failures,
        summary,
    })
}

/// Reads every `*/report.json` under `dir`, in sorted directory order.
///
/// # Errors
///
/// [`PipelineError::Io`] if the directory is unreadable,
/// [`PipelineError::Serde`] for a malformed report.
pub fn load_reports(dir: &Path) -> Result<Vec<FitReport>, PipelineError> {
    let entries = fs::read_dir(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path().join("report.json")))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|source| PipelineError::Io {
            path: p.clone(),
            source,
        })?;
        let report: FitReport = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Serde(format!("{}: {e}", p.display())))?;
        reports.push(report);
    }
    Ok(reports)
}

fn parse_list(value: &str, line: usize) -> Result<Vec<f64>, PipelineError> {
    value
        .split(',')
        .map(|v| {
            v.trim().parse().map_err(|_| {
                PipelineError::Config(format!("line {line}: cannot parse '{v}' as a number"))
            })
        })
        .collect()
}

/// Reads a full pipeline configuration from `#key value` text. Link-model
/// keys are handled by the link-model parser; every other key must be one
/// of the pipeline's own, so typos fail loudly.
///
/// # Errors
///
/// [`PipelineError::Config`] with the offending line.
pub fn parse_pipeline_config(text: &str) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig {
        link: parse_link_model(text)?,
        ..PipelineConfig::default()
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim_end();
        if line.is_empty() {
            continue;
        }
        let Some(rest) = line.strip_prefix('#') else {
            return Err(PipelineError::Config(format!(
                "line {line_no}: expected `#key value`"
            )));
        };
        let Some((key, value)) = rest.split_once(' ') else {
            continue; // bare comment
        };
        let value = value.trim();
        let bad = |what: &str| {
            PipelineError::Config(format!(
                "line {line_no}: cannot parse '{value}' as {what}"
            ))
        };
        let parse_f64 = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
        let parse_usize = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
        let parse_u64 = |what: &str| value.parse::<u64>().map_err(|_| bad(what));
        match key {
            // Link-model keys: already consumed by parse_link_model.
            "path_loss_exponent" | "hpbw_deg" | "antenna_gain_dbi" | "fading_shape"
            | "system_gain_db" | "rotated_antennas" | "absorption_table" => {}
            "distances_m" => cfg.distances_m = parse_list(value, line_no)?,
            "angles_deg" => cfg.angles_deg = parse_list(value, line_no)?,
            "p_tx_dbm" => cfg.p_tx_dbm = parse_f64("a power in dBm")?,
            "f_start_hz" => cfg.grid.f_start_hz = parse_f64("a frequency")?,
            "f_stop_hz" => cfg.grid.f_stop_hz = parse_f64("a frequency")?,
            "n_points" => cfg.grid.n_points = parse_usize("a point count")?,
            "n0_dbm_per_hz" => cfg.noise.n0_dbm_per_hz = parse_f64("a density in dBm/Hz")?,
            "bandwidth_hz" => cfg.noise.bandwidth_hz = parse_f64("a bandwidth")?,
            "window" => cfg.window = value.parse().map_err(PipelineError::Config)?,
            "method" => cfg.method = value.parse().map_err(PipelineError::Config)?,
            "k" => cfg.em.k = parse_usize("a component count")?,
            "threshold" => cfg.threshold = parse_f64("a probability")?,
            "seed" => cfg.seed = parse_u64("a seed")?,
            "jobs" => cfg.jobs = parse_usize("a thread count")?,
            "em_epsilon" => cfg.em.epsilon = parse_f64("a convergence threshold")?,
            "em_max_iters" => cfg.em.max_iters = parse_usize("an iteration cap")?,
            "em_restarts" => cfg.em.n_restarts = parse_usize("a restart count")?,
            "dp_concentration" => cfg.dp.concentration = parse_f64("a concentration")?,
            "dp_max_components" => cfg.dp.max_components = parse_usize("a component cap")?,
            "dp_burnin" => cfg.dp.n_burnin = parse_usize("a sweep count")?,
            "dp_samples" => cfg.dp.n_samples = parse_usize("a sweep count")?,
            "dp_proposal_sd" => cfg.dp.proposal_sd = parse_f64("a proposal scale")?,
            "dp_aux_components" => cfg.dp.aux_components = parse_usize("a slot count")?,
            other => {
                return Err(PipelineError::Config(format!(
                    "line {line_no}: unknown config key '{other}'"
                )));
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Emits the effective configuration in the `#key value` format
/// [`parse_pipeline_config`] reads, for run provenance.
pub fn write_pipeline_config(cfg: &PipelineConfig) -> String {
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let table = cfg
        .link
        .absorption_table
        .iter()
        .map(|(f, c)| format!("{f}:{c}"))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "#distances_m {}\n#angles_deg {}\n#p_tx_dbm {}\n\
         #f_start_hz {}\n#f_stop_hz {}\n#n_points {}\n\
         #path_loss_exponent {}\n#absorption_table {}\n#hpbw_deg {}\n\
         #antenna_gain_dbi {}\n#fading_shape {}\n#system_gain_db {}\n\
         #rotated_antennas {}\n\
         #n0_dbm_per_hz {}\n#bandwidth_hz {}\n#window {}\n#method {}\n\
         #k {}\n#threshold {}\n#seed {}\n#jobs {}\n\
         #em_epsilon {}\n#em_max_iters {}\n#em_restarts {}\n\
         #dp_concentration {}\n#dp_max_components {}\n#dp_burnin {}\n\
         #dp_samples {}\n#dp_proposal_sd {}\n#dp_aux_components {}\n",
        list(&cfg.distances_m),
        list(&cfg.angles_deg),
        cfg.p_tx_dbm,
        cfg.grid.f_start_hz,
        cfg.grid.f_stop_hz,
        cfg.grid.n_points,
        cfg.link.path_loss_exponent,
        table,
        cfg.link.hpbw_deg,
        cfg.link.antenna_gain_dbi,
        cfg.link.fading_shape,
        cfg.link.system_gain_db,
        cfg.link.rotated_antennas,
        cfg.noise.n0_dbm_per_hz,
        cfg.noise.bandwidth_hz,
        cfg.window,
        cfg.method,
        cfg.em.k,
        cfg.threshold,
        cfg.seed,
        cfg.jobs,
        cfg.em.epsilon,
        cfg.em.max_iters,
        cfg.em.n_restarts,
        cfg.dp.concentration,
        cfg.dp.max_components,
        cfg.dp.n_burnin,
        cfg.dp.n_samples,
        cfg.dp.proposal_sd,
        cfg.dp.aux_components,
    )
}
