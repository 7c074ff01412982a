//! Terahertz channel sounding analysis toolkit.
//!
//! The crate covers the full measurement-to-statistics chain for sub-THz
//! links: frequency sweeps (measured or synthesized from a link budget) are
//! turned into channel impulse and frequency responses, per-bin instantaneous
//! SNR samples are extracted, a Gamma mixture is fitted to those samples by
//! expectation maximization (with a Dirichlet-process Gibbs sampler as a
//! fallback when a fixed component count is rejected), the fit is validated
//! with a one-sample Kolmogorov-Smirnov test, and the fitted distribution is
//! integrated into an average channel capacity.
//!
//! ```
//! use thzkit::prelude::*;
//!
//! let meta = ScenarioMeta::new(0.2, 0.0, 0.0, "example")?;
//! let sweep = synth_sweep(&meta, &GridSpec::default(), &LinkModel::default(), 7)?;
//! let snr = snr_samples(&sweep, &NoiseConfig::default())?;
//! let fit = em_fit(snr.samples(), &EmConfig::default())?;
//! let ks = ks_test(snr.samples(), &fit.mixture, 0.005)?;
//! let cap = capacity_quadrature(&fit.mixture, 60e9)?;
//! assert!(cap.capacity_bits_per_s > 0.0 && ks.statistic < 1.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod capacity;
pub mod dpgmm;
pub mod dsp;
pub mod gof;
pub mod mixture;
pub mod pipeline;
pub mod snr;
pub mod sweep;
pub mod synth;

/// Exact SI speed of light, used for free-space path loss and propagation
/// delay. Defined, not measured, so no tolerance applies.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Everything needed for the common sweep -> fit -> capacity chain.
pub mod prelude {
    pub use crate::capacity::{
        capacity_closed_exponential, capacity_monte_carlo, capacity_quadrature, CapacityMethod,
        CapacityResult,
    };
    pub use crate::dpgmm::{dpgmm_fit, DpConfig, DpFit};
    pub use crate::dsp::{frequency_response_db, impulse_response, peak_power_db, Window};
    pub use crate::gof::{ks_pvalue, ks_statistic, ks_test, KsResult};
    pub use crate::mixture::{
        em::{em_fit, EmConfig, EmFit},
        mean_log_likelihood, mixture_cdf, mixture_pdf, sample_mixture, GammaComponent,
        GammaMixture,
    };
    pub use crate::pipeline::{run_pipeline, FitMethod, PipelineConfig};
    pub use crate::snr::{snr_samples, NoiseConfig, SnrSampleSet};
    pub use crate::sweep::{apply_calibration, parse_sweep, write_sweep, ScenarioMeta, Sweep};
    pub use crate::synth::{
        misalignment_gain_db, path_gain_db, synth_sweep, GridSpec, LinkModel,
    };
    pub use crate::SPEED_OF_LIGHT_M_PER_S;
}

use rand_chacha::ChaCha8Rng;

/// Derives an independent, reproducible seed for a named stream of a run.
///
/// Batch stages (per-setting synthesis, fitting, sampling) each take a
/// distinct `stream` so parallel execution order cannot change results.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer: decorrelates nearby (seed, stream) pairs.
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// [`mix_seed`] materialized as a ready-to-use RNG.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}
