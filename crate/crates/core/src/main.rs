//! Command-line front end: each subcommand wraps one pipeline stage, and
//! `run` drives the whole batch. Inputs and outputs are the library's text
//! and JSON formats, so stages compose through files or pipes.

use clap::{Parser, Subcommand};
use std::error::Error;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use thzkit::pipeline::{
    cfr_csv, cir_csv, fit_stage, load_reports, parse_pipeline_config, report_summary,
    FitMethod, FitRecord, FitStageConfig, InputSpec, PipelineConfig,
};
use thzkit::prelude::*;
use thzkit::snr::{parse_snr_samples, write_snr_samples};

#[derive(Parser)]
#[command(
    name = "thzkit",
    version,
    about = "THz channel sweep analysis: sweeps to SNR mixtures to capacity"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize one frequency sweep for a distance/angle scenario.
    Synth {
        /// Link distance in meters.
        #[arg(long)]
        distance_m: f64,
        /// Misalignment angle in degrees, [0, 90).
        #[arg(long, default_value_t = 0.0)]
        angle_deg: f64,
        /// Transmit power recorded in the sweep metadata.
        #[arg(long, allow_negative_numbers = true)]
        p_tx_dbm: Option<f64>,
        /// Scenario label; defaults to d<distance>m_a<angle>deg.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `#key value` config supplying the link model and grid.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a sweep file and rewrite it in canonical form.
    Ingest {
        /// Sweep file to read.
        input: PathBuf,
        /// Through-path calibration sweep to divide out.
        #[arg(long)]
        cal: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Impulse response of a sweep as `delay_s,re,im,power_db` CSV.
    Cir {
        input: PathBuf,
        /// Spectral window applied before the inverse transform.
        #[arg(long, default_value_t = Window::Rect)]
        window: Window,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequency response of a sweep as `freq_hz,magnitude_db` CSV.
    Cfr {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Instantaneous SNR samples of a sweep.
    Snr {
        input: PathBuf,
        #[arg(long)]
        bandwidth_hz: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        n0_dbm_hz: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a Gamma mixture to an SNR sample file.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = FitMethod::Auto)]
        method: FitMethod,
        /// EM component count.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// KS p-value gate used by auto mode.
        #[arg(long, default_value_t = 0.005)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kolmogorov-Smirnov test of a fitted mixture against SNR samples.
    Ks {
        /// SNR sample file the mixture claims to describe.
        input: PathBuf,
        /// Fit record or bare component array (JSON).
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long, default_value_t = 0.005)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average channel capacity of a fitted mixture.
    Capacity {
        /// Fit record or bare component array (JSON).
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long, default_value_t = 60e9)]
        bandwidth_hz: f64,
        /// quadrature or monte-carlo.
        #[arg(long, default_value = "quadrature")]
        method: String,
        /// Monte-Carlo draw count.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full batch: sweeps to per-setting reports and summaries.
    Run {
        /// Output directory; one subdirectory per setting.
        #[arg(long)]
        out: PathBuf,
        /// `#key value` config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of measured sweep files; synthesizes the grid when
        /// omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        method: Option<FitMethod>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bandwidth_hz: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p_tx_dbm: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        n0_dbm_hz: Option<f64>,
        #[arg(long)]
        window: Option<Window>,
        /// Worker threads; 0 uses all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Use the fine acquisition angle grid (0-18 degrees by 1) instead
        /// of the coarse default (0-30 by 5).
        #[arg(long)]
        full_grid: bool,
    },
    /// Rebuild the summary views from a finished run directory.
    Report {
        /// A directory previously produced by `run`.
        run_dir: PathBuf,
        /// Write the text summary here as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Box<dyn Error>> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn read(path: &PathBuf) -> Result<String, Box<dyn Error>> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn load_mixture(path: &PathBuf) -> Result<GammaMixture, Box<dyn Error>> {
    let text = read(path)?;
    if let Ok(record) = serde_json::from_str::<FitRecord>(&text) {
        return Ok(record.components);
    }
    serde_json::from_str::<GammaMixture>(&text).map_err(|e| {
        format!(
            "{} is neither a fit record nor a component array: {e}",
            path.display()
        )
        .into()
    })
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Box<dyn Error>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn base_config(config: &Option<PathBuf>) -> Result<PipelineConfig, Box<dyn Error>> {
    Ok(match config {
        Some(path) => parse_pipeline_config(&read(path)?)?,
        None => PipelineConfig::default(),
    })
}

fn run_cmd(cmd: Cmd) -> Result<ExitCode, Box<dyn Error>> {
    match cmd {
        Cmd::Synth {
            distance_m,
            angle_deg,
            p_tx_dbm,
            label,
            seed,
            config,
            out,
        } => {
            let cfg = base_config(&config)?;
            let label =
                label.unwrap_or_else(|| format!("d{distance_m}m_a{angle_deg}deg"));
            let meta = ScenarioMeta::new(
                distance_m,
                angle_deg,
                p_tx_dbm.unwrap_or(cfg.p_tx_dbm),
                &label,
            )?;
            let sweep = synth_sweep(&meta, &cfg.grid, &cfg.link, seed)?;
            emit(&out, &write_sweep(&sweep))?;
        }
        Cmd::Ingest { input, cal, out } => {
            let mut sweep = parse_sweep(&read(&input)?)?;
            if let Some(cal_path) = cal {
                let reference = parse_sweep(&read(&cal_path)?)?;
                sweep = apply_calibration(&sweep, &reference)?;
            }
            emit(&out, &write_sweep(&sweep))?;
        }
        Cmd::Cir { input, window, out } => {
            let sweep = parse_sweep(&read(&input)?)?;
            emit(&out, &cir_csv(&impulse_response(&sweep, window)))?;
        }
        Cmd::Cfr { input, out } => {
            let sweep = parse_sweep(&read(&input)?)?;
            emit(&out, &cfr_csv(&sweep))?;
        }
        Cmd::Snr {
            input,
            bandwidth_hz,
            n0_dbm_hz,
            out,
        } => {
            let sweep = parse_sweep(&read(&input)?)?;
            let mut noise = NoiseConfig::default();
            if let Some(b) = bandwidth_hz {
                noise.bandwidth_hz = b;
            }
            if let Some(n0) = n0_dbm_hz {
                noise.n0_dbm_per_hz = n0;
            }
            emit(&out, &write_snr_samples(&snr_samples(&sweep, &noise)?))?;
        }
        Cmd::Fit {
            input,
            method,
            k,
            threshold,
            seed,
            out,
        } => {
            let snr = parse_snr_samples(&read(&input)?)?;
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
            let outcome = fit_stage(snr.samples(), &stage)?;
            if method == FitMethod::Auto {
                if let Some(em) = &outcome.em {
                    if !em.ks.pass {
                        eprintln!(
                            "em fit failed the KS gate (p = {:.3e}); refitted with dpgmm",
                            em.ks.p_value
                        );
                    }
                }
            }
            let record = match (&outcome.method, &outcome.em, &outcome.dp) {
                (thzkit::pipeline::MethodTag::Em, Some(a), _) => FitRecord::from_em(&a.fit),
                (thzkit::pipeline::MethodTag::Dpgmm, _, Some(a)) => {
                    FitRecord::from_dp(&a.fit, snr.samples(), &stage.dp)?
                }
                _ => unreachable!("fit stage always fills its reported method"),
            };
            emit(&out, &json(&record)?)?;
        }
        Cmd::Ks {
            input,
            mixture,
            threshold,
            out,
        } => {
            let snr = parse_snr_samples(&read(&input)?)?;
            let m = load_mixture(&mixture)?;
            let result = ks_test(snr.samples(), &m, threshold)?;
            emit(&out, &json(&result)?)?;
        }
        Cmd::Capacity {
            mixture,
            bandwidth_hz,
            method,
            samples,
            seed,
            out,
        } => {
            let m = load_mixture(&mixture)?;
            let result = match method.as_str() {
                "quadrature" => capacity_quadrature(&m, bandwidth_hz)?,
                "monte-carlo" => capacity_monte_carlo(&m, bandwidth_hz, samples, seed)?,
                other => {
                    return Err(format!(
                        "unknown capacity method '{other}', expected quadrature|monte-carlo"
                    )
                    .into())
                }
            };
            emit(&out, &json(&result)?)?;
        }
        Cmd::Run {
            out,
            config,
            input,
            method,
            k,
            threshold,
            seed,
            bandwidth_hz,
            p_tx_dbm,
            n0_dbm_hz,
            window,
            jobs,
            full_grid,
        } => {
            let mut cfg = base_config(&config)?;
            if let Some(dir) = input {
                cfg.input = InputSpec::Ingest(dir);
            }
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(k) = k {
                cfg.em.k = k;
            }
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(b) = bandwidth_hz {
                cfg.noise.bandwidth_hz = b;
            }
            if let Some(p) = p_tx_dbm {
                cfg.p_tx_dbm = p;
            }
            if let Some(n0) = n0_dbm_hz {
                cfg.noise.n0_dbm_per_hz = n0;
            }
            if let Some(w) = window {
                cfg.window = w;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if full_grid {
                cfg.angles_deg = (0..=18).map(f64::from).collect();
            }
            let batch = run_pipeline(&cfg, &out)?;
            print!("{}", batch.summary.text);
            if !batch.failures.is_empty() {
                for f in &batch.failures {
                    eprintln!("setting {} failed: {}", f.setting, f.error);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Report { run_dir, out } => {
            let reports = load_reports(&run_dir)?;
            let summary = report_summary(&reports, &[]);
            fs::write(run_dir.join("capacity.csv"), &summary.capacity_csv)?;
            fs::write(
                run_dir.join("capacity_matrix.csv"),
                &summary.capacity_matrix_csv,
            )?;
            fs::write(run_dir.join("summary.txt"), &summary.text)?;
            print!("{}", summary.text);
            if let Some(path) = out {
                fs::write(&path, &summary.text)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run_cmd(Cli::parse().cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
