//! STFT magnitudes and the spectral distance between impulse responses.
//!
//! `Δ = 0.5·Θ + 0.5·Ξ` per channel, averaged over the two channels, where
//! `Θ` is spectral convergence (Frobenius ratio) and `Ξ` is the mean absolute
//! natural-log magnitude ratio with an additive floor of [`LOG_FLOOR`].

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::acoustics::BinauralRIR;
use crate::error::{Error, Result};

/// Additive floor on magnitudes inside the log-magnitude loss.
pub const LOG_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    Hamming,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub shift: usize,
    pub window_length: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            fft_size: 1024,
            shift: 120,
            window_length: 600,
            window: WindowKind::Hamming,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.window_length > self.fft_size {
            return Err(Error::config("window length must be in [1, fft size]"));
        }
        if self.shift == 0 {
            return Err(Error::config("STFT shift must be > 0"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frames(&self, len: usize) -> usize {
        if len < self.window_length {
            0
        } else {
            (len - self.window_length) / self.shift + 1
        }
    }

    /// Periodic window of `window_length` samples.
    pub fn window_coefficients(&self) -> Vec<f64> {
        let n = self.window_length as f64;
        (0..self.window_length)
            .map(|i| {
                let c = (2.0 * std::f64::consts::PI * i as f64 / n).cos();
                match self.window {
                    WindowKind::Hamming => 0.54 - 0.46 * c,
                    WindowKind::Hann => 0.5 - 0.5 * c,
                }
            })
            .collect()
    }
}

/// Nonnegative magnitudes, `frames x bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl Spectrogram {
    pub fn frame(&self, f: usize) -> &[f64] {
        &self.data[f * self.bins..(f + 1) * self.bins]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Spectrogram {
        Spectrogram {
            data: self.data.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }
}

/// Reusable STFT plan (window and forward/inverse FFTs).
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

/// Per-channel spectral loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralTerms {
    pub convergence: f64,
    pub log_magnitude: f64,
}

impl SpectralTerms {
    pub fn distance(&self) -> f64 {
        0.5 * self.convergence + 0.5 * self.log_magnitude
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Stft {
            cfg,
            window: cfg.window_coefficients(),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    fn spectra(&self, wave: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let cfg = &self.cfg;
        if wave.len() < cfg.window_length {
            return Err(Error::domain(format!(
                "wave of {} samples is shorter than the {}-sample window",
                wave.len(),
                cfg.window_length
            )));
        }
        let frames = cfg.frames(wave.len());
        let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
        let mut out = Vec::with_capacity(frames);
        for f in 0..frames {
            let start = f * cfg.shift;
            let mut buf = vec![Complex64::default(); cfg.fft_size];
            for (i, (b, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                *b = Complex64::new(wave[start + i] * w, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            buf.truncate(cfg.bins());
            out.push(buf);
        }
        Ok(out)
    }

    pub fn magnitude(&self, wave: &[f64]) -> Result<Spectrogram> {
        let spectra = self.spectra(wave)?;
        let bins = self.cfg.bins();
        let data = spectra.iter().flat_map(|s| s.iter().map(|c| c.norm_sqr().sqrt())).collect();
        Ok(Spectrogram { frames: spectra.len(), bins, data })
    }

    /// Loss terms against a target spectrogram and, when `want_grad`, the
    /// gradient of `0.5·Θ + 0.5·Ξ` with respect to the predicted wave.
    pub fn terms_with_grad(&self, target: &Spectrogram, pred: &[f64], want_grad: bool) -> Result<(SpectralTerms, Option<Vec<f64>>)> {
        let spectra = self.spectra(pred)?;
        let bins = self.cfg.bins();
        if spectra.len() != target.frames || bins != target.bins {
            return Err(Error::domain("spectrogram shape mismatch"));
        }
        let zhat: Vec<f64> = spectra.iter().flat_map(|s| s.iter().map(|c| c.norm_sqr().sqrt())).collect();
        let zhat = Spectrogram { frames: target.frames, bins, data: zhat };
        let terms = SpectralTerms {
            convergence: spectral_convergence(target, &zhat)?,
            log_magnitude: log_stft_magnitude(target, &zhat)?,
        };
        if !want_grad {
            return Ok((terms, None));
        }
        let z_norm = target.frobenius();
        let diff_norm = target.data.iter().zip(&zhat.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let count = zhat.data.len() as f64;
        // dΔ/dẑ per entry
        let d_mag: Vec<f64> = target
            .data
            .iter()
            .zip(&zhat.data)
            .map(|(&z, &zh)| {
                let d_conv = if diff_norm > 0.0 { (zh - z) / (diff_norm * z_norm) } else { 0.0 };
                // sign of ln((z + ε) / (ẑ + ε))
                let d_log = if z > zh {
                    -1.0 / ((zh + LOG_FLOOR) * count)
                } else if z < zh {
                    1.0 / ((zh + LOG_FLOOR) * count)
                } else {
                    0.0
                };
                0.5 * d_conv + 0.5 * d_log
            })
            .collect();
        let cfg = &self.cfg;
        let mut grad = vec![0.0; pred.len()];
        let mut scratch = vec![Complex64::default(); self.inverse.get_inplace_scratch_len()];
        for (f, spec) in spectra.iter().enumerate() {
            // dx_n = w_n Re(Σ_k (g_k / |X_k|) X_k e^{+2πikn/N}) over the one-sided bins.
            let mut buf = vec![Complex64::default(); cfg.fft_size];
            for (k, x) in spec.iter().enumerate() {
                let mag = x.norm_sqr().sqrt();
                if mag > 0.0 {
                    buf[k] = x * (d_mag[f * bins + k] / mag);
                }
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = f * cfg.shift;
            for (i, w) in self.window.iter().enumerate() {
                grad[start + i] += w * buf[i].re;
            }
        }
        Ok((terms, Some(grad)))
    }

    /// `Δ` between two binaural responses.
    pub fn distance(&self, truth: &BinauralRIR, pred: &BinauralRIR) -> Result<f64> {
        if truth.len() != pred.len() {
            return Err(Error::domain("RIR length mismatch"));
        }
        let mut total = 0.0;
        for c in 0..2 {
            let z = self.magnitude(&truth.channel_f64(c))?;
            let zhat = self.magnitude(&pred.channel_f64(c))?;
            total += 0.5 * spectral_convergence(&z, &zhat)? + 0.5 * log_stft_magnitude(&z, &zhat)?;
        }
        Ok(total / 2.0)
    }
}

pub fn stft_magnitude(wave: &[f64], cfg: &StftConfig) -> Result<Spectrogram> {
    Stft::new(*cfg)?.magnitude(wave)
}

fn check_shapes(z: &Spectrogram, zhat: &Spectrogram) -> Result<()> {
    if z.frames != zhat.frames || z.bins != zhat.bins {
        return Err(Error::domain(format!(
            "spectrogram shapes differ: {}x{} vs {}x{}",
            z.frames, z.bins, zhat.frames, zhat.bins
        )));
    }
    Ok(())
}

/// `Θ(z, ẑ) = ‖z − ẑ‖_F / ‖z‖_F`.
pub fn spectral_convergence(z: &Spectrogram, zhat: &Spectrogram) -> Result<f64> {
    check_shapes(z, zhat)?;
    let denom = z.frobenius();
    if denom == 0.0 {
        return Err(Error::domain("spectral convergence of an all-zero reference"));
    }
    let num = z.data.iter().zip(&zhat.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(num / denom)
}

/// `Ξ(z, ẑ)`: mean over entries of `|ln((z + ε) / (ẑ + ε))|`.
pub fn log_stft_magnitude(z: &Spectrogram, zhat: &Spectrogram) -> Result<f64> {
    check_shapes(z, zhat)?;
    if z.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = z
        .data
        .iter()
        .zip(&zhat.data)
        .map(|(a, b)| ((a + LOG_FLOOR) / (b + LOG_FLOOR)).ln().abs())
        .sum();
    Ok(sum / z.data.len() as f64)
}

/// `Δ(W, Ŵ) = 0.5·Θ + 0.5·Ξ`, averaged over the two channels.
pub fn stft_distance(truth: &BinauralRIR, pred: &BinauralRIR, cfg: &StftConfig) -> Result<f64> {
    Stft::new(*cfg)?.distance(truth, pred)
}
