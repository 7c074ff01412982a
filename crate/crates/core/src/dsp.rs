//! Channel impulse response (time domain) and channel frequency response
//! (magnitude) from S21 sweeps.
//!
//! The 240-300 GHz grid is treated as an N-point one-sided band and
//! inverse-transformed directly (standard VNA time-domain practice): no
//! zero-padding down to DC, delay resolution 1/(N*grid spacing). Windows are
//! coherently normalized (divided by their mean) so a flat spectrum keeps
//! its amplitude.

use crate::sweep::Sweep;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::fmt;
use std::str::FromStr;

/// Finite stand-in for -infinity dB when a magnitude is exactly zero, so
/// emitted files stay parseable.
pub const DB_SENTINEL: f64 = -400.0;

/// Spectral window applied before the inverse transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    /// No shaping; the exact inverse DFT of the measured band.
    #[default]
    Rect,
    /// Periodic Hann taper for measured data that leaks across delay bins.
    Hann,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rect => "rect",
            Self::Hann => "hann",
        })
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rect" => Ok(Self::Rect),
            "hann" => Ok(Self::Hann),
            other => Err(format!("unknown window '{other}', expected rect|hann")),
        }
    }
}

/// Channel impulse response on the delay grid k/(N*grid spacing).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    delays_s: Vec<f64>,
    taps: Vec<Complex64>,
    window_name: String,
}

impl ImpulseResponse {
    /// Ascending delay axis in seconds; starts at exactly 0.
    pub fn delays_s(&self) -> &[f64] {
        &self.delays_s
    }

    /// Complex taps, one per delay bin.
    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    /// Name of the window applied before the transform.
    pub fn window_name(&self) -> &str {
        &self.window_name
    }

    /// Number of delay bins (equals the sweep length, at least 2).
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    /// Always false; responses inherit the sweep's two-point minimum.
    pub fn is_empty(&self) -> bool {
        false
    }

    #[cfg(test)]
    pub(crate) fn from_parts(delays_s: Vec<f64>, taps: Vec<Complex64>) -> Self {
        Self {
            delays_s,
            taps,
            window_name: "rect".into(),
        }
    }
}

/// Inverse-transforms a sweep into delay-domain taps.
///
/// Taps are the inverse DFT (1/N normalization) of the windowed S21 array;
/// the window is divided by its mean first, so a flat spectrum keeps its
/// amplitude in tap 0.
pub fn impulse_response(sweep: &Sweep, window: Window) -> ImpulseResponse {
    let n = sweep.len();
    let mut buf: Vec<Complex64> = match window {
        Window::Rect => sweep.s21().to_vec(),
        Window::Hann => {
            // Periodic Hann, w_i = 1 - cos(2 pi i / N) after the mean
            // normalization (its raw mean is exactly 1/2).
            sweep
                .s21()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let w = 1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
                    v * w
                })
                .collect()
        }
    };
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    let bin = 1.0 / (n as f64 * sweep.grid_spacing_hz());
    ImpulseResponse {
        delays_s: (0..n).map(|k| k as f64 * bin).collect(),
        taps: buf,
        window_name: window.to_string(),
    }
}

/// Delay and power (20 log10 of magnitude) of the strongest tap; ties go to
/// the smallest delay. A zero-magnitude peak reports [`DB_SENTINEL`].
pub fn peak_power_db(ir: &ImpulseResponse) -> (f64, f64) {
    let mut best = 0usize;
    let mut best_mag = ir.taps[0].norm();
    for (k, tap) in ir.taps.iter().enumerate().skip(1) {
        let mag = tap.norm();
        if mag > best_mag {
            best = k;
            best_mag = mag;
        }
    }
    let db = if best_mag > 0.0 {
        20.0 * best_mag.log10()
    } else {
        DB_SENTINEL
    };
    (ir.delays_s[best], db)
}

/// Magnitude response in dB per grid point; exact zeros map to
/// [`DB_SENTINEL`].
pub fn frequency_response_db(sweep: &Sweep) -> Vec<(f64, f64)> {
    sweep
        .freqs_hz()
        .iter()
        .zip(sweep.s21())
        .map(|(&f, v)| {
            let mag = v.norm();
            let db = if mag > 0.0 {
                20.0 * mag.log10()
            } else {
                DB_SENTINEL
            };
            (f, db)
        })
        .collect()
}
