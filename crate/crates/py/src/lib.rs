//! Python bindings for the sweep-to-capacity analysis chain.
//!
//! The module mirrors the CLI stages one to one: synthesize or parse a
//! sweep, derive impulse/frequency responses and SNR samples, fit a Gamma
//! mixture (EM, Dirichlet-process sampler, or the auto gate), test the fit,
//! and integrate capacity. Wrapper classes hold the Rust values; all
//! numeric payloads cross as plain lists and tuples.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;
use std::str::FromStr;

use thzkit::capacity::{
    capacity_closed_exponential as rs_capacity_closed, capacity_monte_carlo as rs_capacity_mc,
    capacity_quadrature as rs_capacity_quad, CapacityResult,
};
use thzkit::dpgmm::DpConfig;
use thzkit::dsp::{peak_power_db, Window, DB_SENTINEL};
use thzkit::gof::KsResult;
use thzkit::mixture::em::EmConfig;
use thzkit::mixture::{
    mean_log_likelihood, mixture_cdf, mixture_pdf, sample_mixture, GammaComponent, GammaMixture,
};
use thzkit::pipeline::{
    fit_stage, parse_pipeline_config, FitMethod, FitRecord, FitStageConfig, MethodTag,
    PipelineConfig,
};
use thzkit::snr::{NoiseConfig, SnrSampleSet};
use thzkit::sweep::ScenarioMeta;
use thzkit::synth::{GridSpec, LinkModel};

fn val_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One frequency sweep: a uniform grid of complex S21 values plus the
/// scenario metadata.
#[pyclass(name = "Sweep")]
struct PySweep {
    inner: thzkit::sweep::Sweep,
}

#[pymethods]
impl PySweep {
    #[new]
    #[pyo3(signature = (freqs_hz, s21, distance_m, angle_deg=0.0, p_tx_dbm=0.0, label="sweep"))]
    fn new(
        freqs_hz: Vec<f64>,
        s21: Vec<(f64, f64)>,
        distance_m: f64,
        angle_deg: f64,
        p_tx_dbm: f64,
        label: &str,
    ) -> PyResult<Self> {
        let meta =
            ScenarioMeta::new(distance_m, angle_deg, p_tx_dbm, label).map_err(val_err)?;
        let s21 = s21
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect();
        let inner = thzkit::sweep::Sweep::new(freqs_hz, s21, meta).map_err(val_err)?;
        Ok(Self { inner })
    }

    /// Parses the `#sweep v1` text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: thzkit::sweep::parse_sweep(text).map_err(val_err)?,
        })
    }

    /// Serializes to the `#sweep v1` text format.
    fn write(&self) -> String {
        thzkit::sweep::write_sweep(&self.inner)
    }

    /// Divides out a through-path calibration sweep on the same grid.
    fn calibrate(&self, reference: &PySweep) -> PyResult<PySweep> {
        Ok(PySweep {
            inner: thzkit::sweep::apply_calibration(&self.inner, &reference.inner)
                .map_err(val_err)?,
        })
    }

    #[getter]
    fn freqs_hz(&self) -> Vec<f64> {
        self.inner.freqs_hz().to_vec()
    }

    /// S21 values as (re, im) tuples.
    #[getter]
    fn s21(&self) -> Vec<(f64, f64)> {
        self.inner.s21().iter().map(|v| (v.re, v.im)).collect()
    }

    #[getter]
    fn distance_m(&self) -> f64 {
        self.inner.meta().distance_m
    }

    #[getter]
    fn angle_deg(&self) -> f64 {
        self.inner.meta().angle_deg
    }

    #[getter]
    fn p_tx_dbm(&self) -> f64 {
        self.inner.meta().p_tx_dbm
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.meta().label.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let m = self.inner.meta();
        format!(
            "Sweep(label='{}', distance_m={}, angle_deg={}, points={})",
            m.label,
            m.distance_m,
            m.angle_deg,
            self.inner.len()
        )
    }
}

/// Delay-domain channel response: taps on a uniform delay axis.
#[pyclass(name = "ImpulseResponse")]
struct PyImpulseResponse {
    inner: thzkit::dsp::ImpulseResponse,
}

#[pymethods]
impl PyImpulseResponse {
    /// Ascending delay axis in seconds, starting at 0.
    #[getter]
    fn delays_s(&self) -> Vec<f64> {
        self.inner.delays_s().to_vec()
    }

    /// Complex taps as (re, im) tuples.
    #[getter]
    fn taps(&self) -> Vec<(f64, f64)> {
        self.inner.taps().iter().map(|v| (v.re, v.im)).collect()
    }

    /// Tap powers as 20 log10 magnitude; zero taps report the dB sentinel.
    #[getter]
    fn power_db(&self) -> Vec<f64> {
        self.inner
            .taps()
            .iter()
            .map(|v| {
                let mag = v.norm();
                if mag > 0.0 {
                    20.0 * mag.log10()
                } else {
                    DB_SENTINEL
                }
            })
            .collect()
    }

    #[getter]
    fn window(&self) -> String {
        self.inner.window_name().to_string()
    }

    /// (delay_s, power_db) of the strongest tap; ties go to the smallest
    /// delay.
    fn peak(&self) -> (f64, f64) {
        peak_power_db(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let (delay, power) = self.peak();
        format!(
            "ImpulseResponse(window='{}', bins={}, peak=({delay:.3e} s, {power:.2} dB))",
            self.inner.window_name(),
            self.inner.len()
        )
    }
}

/// Instantaneous-SNR samples extracted from a sweep under a noise model.
#[pyclass(name = "SnrSamples")]
struct PySnrSamples {
    inner: SnrSampleSet,
}

#[pymethods]
impl PySnrSamples {
    /// Parses the `#snr v1` text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: thzkit::snr::parse_snr_samples(text).map_err(val_err)?,
        })
    }

    /// Serializes to the `#snr v1` text format.
    fn write(&self) -> String {
        thzkit::snr::write_snr_samples(&self.inner)
    }

    /// Linear (not dB) SNR values, all finite and positive.
    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    /// Zero-magnitude grid points dropped during extraction.
    #[getter]
    fn dropped(&self) -> usize {
        self.inner.dropped()
    }

    #[getter]
    fn n0_dbm_per_hz(&self) -> f64 {
        self.inner.noise().n0_dbm_per_hz
    }

    #[getter]
    fn bandwidth_hz(&self) -> f64 {
        self.inner.noise().bandwidth_hz
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.meta().label.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SnrSamples(label='{}', n={}, dropped={})",
            self.inner.meta().label,
            self.inner.len(),
            self.inner.dropped()
        )
    }
}

/// A finite Gamma mixture: (weight, shape, rate) components with weights
/// summing to 1.
#[pyclass(name = "GammaMixture")]
struct PyGammaMixture {
    inner: GammaMixture,
}

#[pymethods]
impl PyGammaMixture {
    #[new]
    fn new(components: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let components = components
            .into_iter()
            .map(|(weight, shape, rate)| GammaComponent {
                weight,
                shape,
                rate,
            })
            .collect();
        Ok(Self {
            inner: GammaMixture::new(components).map_err(val_err)?,
        })
    }

    /// Components as (weight, shape, rate) tuples.
    #[getter]
    fn components(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .components()
            .iter()
            .map(|c| (c.weight, c.shape, c.rate))
            .collect()
    }

    /// Component count.
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        mixture_pdf(x, &self.inner).map_err(val_err)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        mixture_cdf(x, &self.inner).map_err(val_err)
    }

    /// Mean log-likelihood of positive data under this mixture.
    fn mean_log_likelihood(&self, data: Vec<f64>) -> PyResult<f64> {
        mean_log_likelihood(&data, &self.inner).map_err(val_err)
    }

    /// Draws reproducible samples from the mixture.
    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        sample_mixture(&self.inner, n, seed)
    }

    fn __len__(&self) -> usize {
        self.inner.k()
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> = self
            .inner
            .components()
            .iter()
            .map(|c| format!("({:.4}, {:.4}, {:.4})", c.weight, c.shape, c.rate))
            .collect();
        format!("GammaMixture([{}])", parts.join(", "))
    }
}

/// One-sample Kolmogorov-Smirnov outcome.
#[pyclass(name = "KsResult")]
struct PyKsResult {
    inner: KsResult,
}

#[pymethods]
impl PyKsResult {
    /// Supremum distance D in [0, 1].
    #[getter]
    fn statistic(&self) -> f64 {
        self.inner.statistic
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.inner.p_value
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// True when the p-value met the threshold.
    #[getter]
    fn passed(&self) -> bool {
        self.inner.pass
    }

    fn __repr__(&self) -> String {
        format!(
            "KsResult(statistic={:.6}, p_value={:.6}, n={}, passed={})",
            self.inner.statistic, self.inner.p_value, self.inner.n, self.inner.pass
        )
    }
}

/// An average-capacity estimate with its error budget.
#[pyclass(name = "Capacity")]
struct PyCapacity {
    inner: CapacityResult,
}

#[pymethods]
impl PyCapacity {
    #[getter]
    fn bits_per_s(&self) -> f64 {
        self.inner.capacity_bits_per_s
    }

    #[getter]
    fn bandwidth_hz(&self) -> f64 {
        self.inner.bandwidth_hz
    }

    /// "quadrature", "monte_carlo", or "closed_exponential".
    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    #[getter]
    fn est_abs_error(&self) -> f64 {
        self.inner.est_abs_error
    }

    fn bits_per_s_per_hz(&self) -> f64 {
        self.inner.bits_per_s_per_hz()
    }

    fn __repr__(&self) -> String {
        format!(
            "Capacity(bits_per_s={:.6e}, method='{}', est_abs_error={:.3e})",
            self.inner.capacity_bits_per_s, self.inner.method, self.inner.est_abs_error
        )
    }
}

/// A finished mixture fit: the winning mixture plus run diagnostics.
#[pyclass(name = "FitResult")]
struct PyFitResult {
    record: FitRecord,
    ll_trace: Option<Vec<f64>>,
}

#[pymethods]
impl PyFitResult {
    /// "em" or "dpgmm".
    #[getter]
    fn method(&self) -> String {
        self.record.method.to_string()
    }

    #[getter]
    fn mixture(&self) -> PyGammaMixture {
        PyGammaMixture {
            inner: self.record.components.clone(),
        }
    }

    #[getter]
    fn final_mean_log_likelihood(&self) -> f64 {
        self.record.final_mean_log_likelihood
    }

    /// EM iterations, or total sampler sweeps for the Dirichlet process.
    #[getter]
    fn iterations(&self) -> usize {
        self.record.iterations
    }

    /// EM convergence flag; None for the sampler.
    #[getter]
    fn converged(&self) -> Option<bool> {
        self.record.converged
    }

    /// Parameter-move acceptance rate; None for EM.
    #[getter]
    fn acceptance_rate(&self) -> Option<f64> {
        self.record.acceptance_rate
    }

    /// Active-cluster count per sampler sweep; None for EM.
    #[getter]
    fn active_clusters_trace(&self) -> Option<Vec<usize>> {
        self.record.active_clusters_trace.clone()
    }

    /// Accepted mean log-likelihood per EM iteration; None for the sampler.
    #[getter]
    fn log_likelihood_trace(&self) -> Option<Vec<f64>> {
        self.ll_trace.clone()
    }

    /// The fit record as JSON, interchangeable with the CLI's fit output.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.record).map_err(val_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(method='{}', k={}, final_mean_log_likelihood={:.6})",
            self.record.method,
            self.record.components.k(),
            self.record.final_mean_log_likelihood
        )
    }
}

/// Outcome of a full batch run.
#[pyclass(name = "BatchSummary")]
struct PyBatchSummary {
    n_pass: usize,
    n_total: usize,
    failures: Vec<(String, String)>,
    text: String,
}

#[pymethods]
impl PyBatchSummary {
    /// Settings whose fit passed the KS gate.
    #[getter]
    fn n_pass(&self) -> usize {
        self.n_pass
    }

    /// Settings that produced a report.
    #[getter]
    fn n_total(&self) -> usize {
        self.n_total
    }

    /// (setting, error) pairs for settings that produced no report.
    #[getter]
    fn failures(&self) -> Vec<(String, String)> {
        self.failures.clone()
    }

    /// The human-readable summary table.
    #[getter]
    fn text(&self) -> String {
        self.text.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "BatchSummary(n_pass={}, n_total={}, failures={})",
            self.n_pass,
            self.n_total,
            self.failures.len()
        )
    }
}

/// Synthesizes one sweep from the link-budget model.
///
/// `fading_shape` and `system_gain_db` default to the shipped model;
/// pass `fading_shape=FADING_DISABLED_SHAPE` for a fading-free channel.
#[pyfunction]
#[pyo3(signature = (distance_m, angle_deg=0.0, p_tx_dbm=0.0, label=None, seed=0,
                    f_start_hz=240e9, f_stop_hz=300e9, n_points=4096,
                    fading_shape=None, system_gain_db=None))]
#[allow(clippy::too_many_arguments)]
fn synth_sweep(
    distance_m: f64,
    angle_deg: f64,
    p_tx_dbm: f64,
    label: Option<String>,
    seed: u64,
    f_start_hz: f64,
    f_stop_hz: f64,
    n_points: usize,
    fading_shape: Option<f64>,
    system_gain_db: Option<f64>,
) -> PyResult<PySweep> {
    let label = label.unwrap_or_else(|| format!("d{distance_m}m_a{angle_deg}deg"));
    let meta = ScenarioMeta::new(distance_m, angle_deg, p_tx_dbm, label).map_err(val_err)?;
    let grid = GridSpec {
        f_start_hz,
        f_stop_hz,
        n_points,
    };
    let mut link = LinkModel::default();
    if let Some(shape) = fading_shape {
        link.fading_shape = shape;
    }
    if let Some(gain) = system_gain_db {
        link.system_gain_db = gain;
    }
    Ok(PySweep {
        inner: thzkit::synth::synth_sweep(&meta, &grid, &link, seed).map_err(val_err)?,
    })
}

/// Parses the `#sweep v1` text format.
#[pyfunction]
fn parse_sweep(text: &str) -> PyResult<PySweep> {
    PySweep::parse(text)
}

/// Inverse-transforms a sweep into delay-domain taps.
#[pyfunction]
#[pyo3(signature = (sweep, window="rect"))]
fn impulse_response(sweep: &PySweep, window: &str) -> PyResult<PyImpulseResponse> {
    let window = Window::from_str(window).map_err(val_err)?;
    Ok(PyImpulseResponse {
        inner: thzkit::dsp::impulse_response(&sweep.inner, window),
    })
}

/// Magnitude response as (freq_hz, dB) pairs.
#[pyfunction]
fn frequency_response_db(sweep: &PySweep) -> Vec<(f64, f64)> {
    thzkit::dsp::frequency_response_db(&sweep.inner)
}

/// Per-bin instantaneous SNR of a sweep under the noise model.
#[pyfunction]
#[pyo3(signature = (sweep, n0_dbm_per_hz=-174.0, bandwidth_hz=60e9))]
fn snr_samples(sweep: &PySweep, n0_dbm_per_hz: f64, bandwidth_hz: f64) -> PyResult<PySnrSamples> {
    let noise = NoiseConfig {
        n0_dbm_per_hz,
        bandwidth_hz,
    };
    Ok(PySnrSamples {
        inner: thzkit::snr::snr_samples(&sweep.inner, &noise).map_err(val_err)?,
    })
}

/// Fits a K-component Gamma mixture by expectation maximization.
#[pyfunction]
#[pyo3(signature = (samples, k=4, epsilon=1e-6, max_iters=500, n_restarts=4, seed=0))]
fn em_fit(
    samples: Vec<f64>,
    k: usize,
    epsilon: f64,
    max_iters: usize,
    n_restarts: usize,
    seed: u64,
) -> PyResult<PyFitResult> {
    let cfg = EmConfig {
        k,
        epsilon,
        max_iters,
        seed,
        n_restarts,
    };
    let fit = thzkit::mixture::em::em_fit(&samples, &cfg).map_err(val_err)?;
    Ok(PyFitResult {
        record: FitRecord::from_em(&fit),
        ll_trace: Some(fit.trace.mean_log_likelihood),
    })
}

/// Fits a Gamma mixture with the Dirichlet-process Gibbs sampler.
#[pyfunction]
#[pyo3(signature = (samples, concentration=1.0, max_components=16, n_burnin=2000,
                    n_samples=2000, proposal_sd=0.25, aux_components=3, seed=0))]
#[allow(clippy::too_many_arguments)]
fn dpgmm_fit(
    samples: Vec<f64>,
    concentration: f64,
    max_components: usize,
    n_burnin: usize,
    n_samples: usize,
    proposal_sd: f64,
    aux_components: usize,
    seed: u64,
) -> PyResult<PyFitResult> {
    let cfg = DpConfig {
        concentration,
        max_components,
        n_burnin,
        n_samples,
        proposal_sd,
        aux_components,
        seed,
    };
    let fit = thzkit::dpgmm::dpgmm_fit(&samples, &cfg).map_err(val_err)?;
    let record = FitRecord::from_dp(&fit, &samples, &cfg).map_err(val_err)?;
    Ok(PyFitResult {
        record,
        ll_trace: None,
    })
}

/// Fits SNR samples with the configured method.
///
/// "auto" runs EM first and falls back to the Dirichlet-process sampler
/// only when the EM fit fails the KS gate at `threshold`.
#[pyfunction]
#[pyo3(signature = (samples, method="auto", k=4, threshold=0.005, seed=0))]
fn fit_snr(
    samples: Vec<f64>,
    method: &str,
    k: usize,
    threshold: f64,
    seed: u64,
) -> PyResult<PyFitResult> {
    let method = FitMethod::from_str(method).map_err(val_err)?;
    let stage = FitStageConfig {
        method,
        threshold,
        em: EmConfig {
            k,
            seed,
            ..EmConfig::default()
        },
        dp: DpConfig {
            seed,
            ..DpConfig::default()
        },
    };
    let outcome = fit_stage(&samples, &stage).map_err(val_err)?;
    match (outcome.method, outcome.em, outcome.dp) {
        (MethodTag::Em, Some(attempt), _) => Ok(PyFitResult {
            record: FitRecord::from_em(&attempt.fit),
            ll_trace: Some(attempt.fit.trace.mean_log_likelihood),
        }),
        (MethodTag::Dpgmm, _, Some(attempt)) => Ok(PyFitResult {
            record: FitRecord::from_dp(&attempt.fit, &samples, &stage.dp).map_err(val_err)?,
            ll_trace: None,
        }),
        _ => Err(PyValueError::new_err(
            "fit stage reported a method without its attempt",
        )),
    }
}

/// One-sample KS test of a mixture against the data.
#[pyfunction]
#[pyo3(signature = (samples, mixture, threshold=0.005))]
fn ks_test(samples: Vec<f64>, mixture: &PyGammaMixture, threshold: f64) -> PyResult<PyKsResult> {
    Ok(PyKsResult {
        inner: thzkit::gof::ks_test(&samples, &mixture.inner, threshold).map_err(val_err)?,
    })
}

/// Average capacity by per-component adaptive quadrature.
#[pyfunction]
#[pyo3(signature = (mixture, bandwidth_hz=60e9))]
fn capacity_quadrature(mixture: &PyGammaMixture, bandwidth_hz: f64) -> PyResult<PyCapacity> {
    Ok(PyCapacity {
        inner: rs_capacity_quad(&mixture.inner, bandwidth_hz).map_err(val_err)?,
    })
}

/// Average capacity by Monte-Carlo sampling; the error field is one
/// standard error.
#[pyfunction]
#[pyo3(signature = (mixture, bandwidth_hz=60e9, n_samples=200_000, seed=0))]
fn capacity_monte_carlo(
    mixture: &PyGammaMixture,
    bandwidth_hz: f64,
    n_samples: usize,
    seed: u64,
) -> PyResult<PyCapacity> {
    Ok(PyCapacity {
        inner: rs_capacity_mc(&mixture.inner, bandwidth_hz, n_samples, seed).map_err(val_err)?,
    })
}

/// Closed-form capacity of a unit-shape (exponential) SNR distribution.
#[pyfunction]
#[pyo3(signature = (rate, bandwidth_hz=60e9))]
fn capacity_closed_exponential(rate: f64, bandwidth_hz: f64) -> PyResult<PyCapacity> {
    Ok(PyCapacity {
        inner: rs_capacity_closed(rate, bandwidth_hz).map_err(val_err)?,
    })
}

/// Runs the full batch into `out_dir` and returns the summary.
///
/// `config_text` uses the same `#key value` format the CLI reads; the
/// default configuration synthesizes the standard distance/angle grid.
#[pyfunction]
#[pyo3(signature = (out_dir, config_text=None))]
fn run_pipeline(out_dir: PathBuf, config_text: Option<&str>) -> PyResult<PyBatchSummary> {
    let cfg = match config_text {
        Some(text) => parse_pipeline_config(text).map_err(val_err)?,
        None => PipelineConfig::default(),
    };
    let batch = thzkit::pipeline::run_pipeline(&cfg, &out_dir)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(PyBatchSummary {
        n_pass: batch.summary.n_pass,
        n_total: batch.summary.n_total,
        failures: batch
            .failures
            .into_iter()
            .map(|f| (f.setting, f.error))
            .collect(),
        text: batch.summary.text,
    })
}

#[pymodule]
fn thzkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySweep>()?;
    m.add_class::<PyImpulseResponse>()?;
    m.add_class::<PySnrSamples>()?;
    m.add_class::<PyGammaMixture>()?;
    m.add_class::<PyKsResult>()?;
    m.add_class::<PyCapacity>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyBatchSummary>()?;
    m.add_function(wrap_pyfunction!(synth_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(parse_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(impulse_response, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_response_db, m)?)?;
    m.add_function(wrap_pyfunction!(snr_samples, m)?)?;
    m.add_function(wrap_pyfunction!(em_fit, m)?)?;
    m.add_function(wrap_pyfunction!(dpgmm_fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_snr, m)?)?;
    m.add_function(wrap_pyfunction!(ks_test, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_closed_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("SPEED_OF_LIGHT_M_PER_S", thzkit::SPEED_OF_LIGHT_M_PER_S)?;
    m.add("DB_SENTINEL", DB_SENTINEL)?;
    m.add(
        "FADING_DISABLED_SHAPE",
        thzkit::synth::FADING_DISABLED_SHAPE,
    )?;
    m.add(
        "DEFAULT_SYSTEM_GAIN_DB",
        thzkit::synth::DEFAULT_SYSTEM_GAIN_DB,
    )?;
    Ok(())
}
