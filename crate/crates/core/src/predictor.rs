//! RIR predictor: current-pair encoder `E_r`, memory encoder `E_m`, and a
//! dense generator `D_r` regressed against the image-source oracle.
//!
//! The reference architecture uses convolutional encoders and a ProGAN-style
//! upsampling generator (conv blocks with pixel norm and LReLU, doubling the
//! time axis per stage, sigmoid output of shape 2 x 16000). Here each stage is
//! a dense layer with the same input/output contract:
//!
//! ```text
//! E_r: [obs^ω | obs^ν] -> per-slot modality encoders -> f_r
//! E_m: κ pairs -> per-slot modality encoders -> mean over slots -> ReLU proj -> f_m
//! D_r: [f_r | f_m] -> LReLU(0.2) -> sigmoid(2L) -> 2u - 1
//! ```

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::BinauralRIR;
use crate::error::{Error, Result};
use crate::learn::{Activation, Dense, DenseOut, ParamStore, Tensor2};
use crate::policy::{EncoderCache, EncoderInput, EncoderWidths, ObsEncoder, ObsFeatures};
use crate::spectral::{Spectrogram, Stft};

/// Ring buffer of the last `κ` observation pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    kappa: usize,
    vision_len: usize,
    pairs: VecDeque<[ObsFeatures; 2]>,
}

impl MemoryBank {
    pub fn new(kappa: usize, vision_len: usize) -> Self {
        MemoryBank { kappa, vision_len, pairs: VecDeque::with_capacity(kappa) }
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn push(&mut self, pair: [ObsFeatures; 2]) {
        if self.kappa == 0 {
            return;
        }
        if self.pairs.len() == self.kappa {
            self.pairs.pop_front();
        }
        self.pairs.push_back(pair);
    }

    pub fn stored(&self) -> impl Iterator<Item = &[ObsFeatures; 2]> {
        self.pairs.iter()
    }

    /// Exactly `κ` slots; missing (oldest) slots are zero observations.
    pub fn slots(&self) -> Vec<[ObsFeatures; 2]> {
        let pad = self.kappa - self.pairs.len();
        let zero = ObsFeatures::zeros(self.vision_len);
        let mut out: Vec<[ObsFeatures; 2]> = (0..pad).map(|_| [zero.clone(), zero.clone()]).collect();
        out.extend(self.pairs.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub patch_len: usize,
    pub encoder: EncoderWidths,
    /// Width of `f_m`.
    pub memory_width: usize,
    pub kappa: usize,
    pub generator_hidden: usize,
    /// Samples per channel.
    pub rir_length: usize,
    pub sample_rate: u32,
}

impl PredictorConfig {
    pub fn latent_width(&self) -> usize {
        2 * self.encoder.total() + self.memory_width
    }
}

/// One generator query: the current pair and the `κ` memory slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionInput {
    pub current: [ObsFeatures; 2],
    pub memory: Vec<[ObsFeatures; 2]>,
}

impl PredictionInput {
    /// Pushes `current` into `bank` and snapshots the slots.
    pub fn observe(bank: &mut MemoryBank, current: [ObsFeatures; 2]) -> Self {
        bank.push(current.clone());
        PredictionInput { current, memory: bank.slots() }
    }

    /// Same query with emitter and receiver roles exchanged everywhere.
    pub fn swapped(&self) -> Self {
        let swap = |p: &[ObsFeatures; 2]| [p[1].clone(), p[0].clone()];
        PredictionInput { current: swap(&self.current), memory: self.memory.iter().map(swap).collect() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Predictor {
    /// Current-pair encoders, emitter slot then receiver slot.
    pub current: [ObsEncoder; 2],
    pub memory: [ObsEncoder; 2],
    pub memory_proj: Dense,
    pub gen_hidden: Dense,
    pub gen_out: Dense,
    pub cfg: PredictorConfig,
}

#[derive(Debug, Clone)]
pub struct PredictorCache {
    current: [EncoderCache; 2],
    /// Slot-major stacked memory encodings (`κ·B` rows), if `κ > 0`.
    memory: Option<([EncoderCache; 2], DenseOut)>,
    gen_hidden: DenseOut,
    gen_out: DenseOut,
    pub latent: Tensor2,
    /// Waveforms in `[-1, 1]`, one `2L` row per query.
    pub wave: Tensor2,
}

const SLOTS: [&str; 2] = ["emitter", "receiver"];

impl Predictor {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: PredictorConfig, rng: &mut R) -> Result<Self> {
        if cfg.rir_length == 0 {
            return Err(Error::config("RIR length must be positive"));
        }
        let enc = |group: &str, slot: &str, store: &mut ParamStore, rng: &mut R| {
            ObsEncoder::new(store, &format!("predictor.{group}.{slot}"), cfg.patch_len, cfg.encoder, rng)
        };
        let current = [enc("current", SLOTS[0], store, rng)?, enc("current", SLOTS[1], store, rng)?];
        let memory = [enc("memory", SLOTS[0], store, rng)?, enc("memory", SLOTS[1], store, rng)?];
        let memory_proj = Dense::new(store, "predictor.memory.proj", 2 * cfg.encoder.total(), cfg.memory_width, Activation::Relu, rng)?;
        let gen_hidden = Dense::new(store, "predictor.generator.hidden", cfg.latent_width(), cfg.generator_hidden, Activation::LeakyRelu, rng)?;
        let gen_out = Dense::new(store, "predictor.generator.out", cfg.generator_hidden, 2 * cfg.rir_length, Activation::Sigmoid, rng)?;
        Ok(Predictor { current, memory, memory_proj, gen_hidden, gen_out, cfg })
    }

    pub fn lookup(store: &ParamStore, cfg: PredictorConfig) -> Result<Self> {
        let enc = |group: &str, slot: &str| ObsEncoder::lookup(store, &format!("predictor.{group}.{slot}"));
        let p = Predictor {
            current: [enc("current", SLOTS[0])?, enc("current", SLOTS[1])?],
            memory: [enc("memory", SLOTS[0])?, enc("memory", SLOTS[1])?],
            memory_proj: Dense::lookup(store, "predictor.memory.proj", Activation::Relu)?,
            gen_hidden: Dense::lookup(store, "predictor.generator.hidden", Activation::LeakyRelu)?,
            gen_out: Dense::lookup(store, "predictor.generator.out", Activation::Sigmoid)?,
            cfg,
        };
        if p.gen_out.outputs != 2 * cfg.rir_length || p.gen_hidden.inputs != cfg.latent_width() {
            return Err(Error::config("predictor parameters do not match the configuration"));
        }
        Ok(p)
    }

    /// `f_r` for a batch of pairs: `[E(emitter) | E(receiver)]`.
    pub fn encode_pair(&self, store: &ParamStore, pairs: &[&[ObsFeatures; 2]]) -> Result<([EncoderCache; 2], Tensor2)> {
        encode_slots(&self.current, store, pairs)
    }

    /// `f_m` for a batch of banks (each exactly `κ` slots).
    pub fn encode_memory(&self, store: &ParamStore, banks: &[&[[ObsFeatures; 2]]]) -> Result<(Option<([EncoderCache; 2], DenseOut)>, Tensor2)> {
        let batch = banks.len();
        let kappa = self.cfg.kappa;
        if kappa == 0 {
            return Ok((None, Tensor2::zeros(batch, self.cfg.memory_width)));
        }
        if banks.iter().any(|b| b.len() != kappa) {
            return Err(Error::config(format!("memory banks must hold exactly {kappa} slots")));
        }
        // slot-major: row k·B + b
        let stacked: Vec<&[ObsFeatures; 2]> = (0..kappa).flat_map(|k| banks.iter().map(move |b| &b[k])).collect();
        let (caches, codes) = encode_slots(&self.memory, store, &stacked)?;
        let mut pooled = Tensor2::zeros(batch, codes.cols());
        for k in 0..kappa {
            for b in 0..batch {
                for (p, c) in pooled.row_mut(b).iter_mut().zip(codes.row(k * batch + b)) {
                    *p += c / kappa as f64;
                }
            }
        }
        let proj = self.memory_proj.forward(store, &pooled)?;
        let f_m = proj.out.clone();
        Ok((Some((caches, proj)), f_m))
    }

    /// `D_r([f_r | f_m])` for a batch of queries.
    pub fn forward(&self, store: &ParamStore, inputs: &[&PredictionInput]) -> Result<PredictorCache> {
        if inputs.is_empty() {
            return Err(Error::config("empty prediction batch"));
        }
        let pairs: Vec<&[ObsFeatures; 2]> = inputs.iter().map(|i| &i.current).collect();
        let (current, f_r) = self.encode_pair(store, &pairs)?;
        let banks: Vec<&[[ObsFeatures; 2]]> = inputs.iter().map(|i| i.memory.as_slice()).collect();
        let (memory, f_m) = self.encode_memory(store, &banks)?;
        let latent = Tensor2::hcat(&[&f_r, &f_m])?;
        let gen_hidden = self.gen_hidden.forward(store, &latent)?;
        let gen_out = self.gen_out.forward(store, &gen_hidden.out)?;
        let mut wave = gen_out.out.clone();
        for v in wave.data_mut() {
            *v = 2.0 * *v - 1.0;
        }
        Ok(PredictorCache { current, memory, gen_hidden, gen_out, latent, wave })
    }

    pub fn predict(&self, store: &ParamStore, input: &PredictionInput) -> Result<BinauralRIR> {
        let cache = self.forward(store, &[input])?;
        BinauralRIR::from_f64(self.cfg.sample_rate, cache.wave.row(0))
    }

    /// Accumulates parameter gradients given `dL/dwave` (batch x 2L).
    pub fn backward(&self, store: &mut ParamStore, cache: &PredictorCache, d_wave: &Tensor2) {
        let mut d_unit = d_wave.clone();
        d_unit.scale(2.0);
        let d_hidden = self.gen_out.backward(store, &cache.gen_out, &d_unit, true).expect("requested");
        let d_latent = self.gen_hidden.backward(store, &cache.gen_hidden, &d_hidden, true).expect("requested");
        let e = self.cfg.encoder.total();
        let d_fr = d_latent.columns(0, 2 * e);
        self.current[0].backward(store, &cache.current[0], &d_fr.columns(0, e));
        self.current[1].backward(store, &cache.current[1], &d_fr.columns(e, e));
        if let Some((caches, proj)) = &cache.memory {
            let d_fm = d_latent.columns(2 * e, self.cfg.memory_width);
            let d_pooled = self.memory_proj.backward(store, proj, &d_fm, true).expect("requested");
            let batch = d_pooled.rows();
            let kappa = self.cfg.kappa;
            let mut d_codes = Tensor2::zeros(kappa * batch, 2 * e);
            for k in 0..kappa {
                for b in 0..batch {
                    for (d, g) in d_codes.row_mut(k * batch + b).iter_mut().zip(d_pooled.row(b)) {
                        *d = g / kappa as f64;
                    }
                }
            }
            self.memory[0].backward(store, &caches[0], &d_codes.columns(0, e));
            self.memory[1].backward(store, &caches[1], &d_codes.columns(e, e));
        }
    }
}

fn encode_slots(encoders: &[ObsEncoder; 2], store: &ParamStore, pairs: &[&[ObsFeatures; 2]]) -> Result<([EncoderCache; 2], Tensor2)> {
    let emit = EncoderInput::from_features(pairs.iter().map(|p| &p[0]))?;
    let recv = EncoderInput::from_features(pairs.iter().map(|p| &p[1]))?;
    let a = encoders[0].forward(store, &emit)?;
    let b = encoders[1].forward(store, &recv)?;
    let code = Tensor2::hcat(&[&a.out, &b.out])?;
    Ok(([a, b], code))
}

/// `L^ξ = (1 − w^MSE)·stft_scale·Δ + w^MSE·mse_scale·MSE`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionLossWeights {
    pub w_mse: f64,
    pub stft_scale: f64,
    pub mse_scale: f64,
}

impl Default for PredictionLossWeights {
    fn default() -> Self {
        PredictionLossWeights { w_mse: 1.0, stft_scale: 10.0, mse_scale: 4464.2 }
    }
}

impl PredictionLossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_mse) {
            return Err(Error::config(format!("w_mse = {} outside [0, 1]", self.w_mse)));
        }
        if !(self.stft_scale >= 0.0 && self.mse_scale >= 0.0) {
            return Err(Error::config("loss scales must be nonnegative"));
        }
        Ok(())
    }

    fn stft_coef(&self) -> f64 {
        (1.0 - self.w_mse) * self.stft_scale
    }

    fn mse_coef(&self) -> f64 {
        self.w_mse * self.mse_scale
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RirLoss {
    pub total: f64,
    /// `Δ` averaged over channels; left at 0 when its weight is zero and
    /// it was not requested.
    pub stft: f64,
    /// Mean squared error over all `2L` samples.
    pub mse: f64,
}

/// `L^ξ` between a ground-truth and a predicted response.
pub fn rir_loss(truth: &BinauralRIR, pred: &BinauralRIR, weights: &PredictionLossWeights, stft: &Stft) -> Result<RirLoss> {
    if truth.len() != pred.len() {
        return Err(Error::domain("RIR length mismatch"));
    }
    let target = RirTarget::new(truth, stft, true)?;
    let (loss, _) = target.loss_with_grad(&pred.to_f64(), weights, stft, false, true)?;
    Ok(loss)
}

/// A ground-truth response with its spectrograms precomputed.
#[derive(Debug, Clone)]
pub struct RirTarget {
    pub wave: Vec<f64>,
    spectra: Option<[Spectrogram; 2]>,
}

impl RirTarget {
    pub fn new(truth: &BinauralRIR, stft: &Stft, with_spectra: bool) -> Result<Self> {
        let spectra = if with_spectra {
            Some([stft.magnitude(&truth.channel_f64(0))?, stft.magnitude(&truth.channel_f64(1))?])
        } else {
            None
        };
        Ok(RirTarget { wave: truth.to_f64(), spectra })
    }

    /// Loss against a predicted `2L` wave and, with `want_grad`, its
    /// gradient with respect to that wave. The STFT path is skipped unless
    /// it carries weight or `force_stft` is set.
    pub fn loss_with_grad(
        &self,
        pred: &[f64],
        weights: &PredictionLossWeights,
        stft: &Stft,
        want_grad: bool,
        force_stft: bool,
    ) -> Result<(RirLoss, Option<Vec<f64>>)> {
        if pred.len() != self.wave.len() {
            return Err(Error::domain("RIR length mismatch"));
        }
        let n = pred.len() as f64;
        let mse = pred.iter().zip(&self.wave).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
        let mut grad = want_grad.then(|| {
            pred.iter().zip(&self.wave).map(|(p, t)| weights.mse_coef() * 2.0 * (p - t) / n).collect::<Vec<f64>>()
        });
        let mut stft_value = 0.0;
        if weights.stft_coef() > 0.0 || force_stft {
            let spectra = self.spectra.as_ref().ok_or_else(|| Error::config("target built without spectrograms"))?;
            let l = pred.len() / 2;
            let need = want_grad && weights.stft_coef() > 0.0;
            for c in 0..2 {
                let (terms, g) = stft.terms_with_grad(&spectra[c], &pred[c * l..(c + 1) * l], need)?;
                stft_value += terms.distance() / 2.0;
                if let (Some(grad), Some(g)) = (grad.as_mut(), g) {
                    for (a, b) in grad[c * l..(c + 1) * l].iter_mut().zip(g) {
                        *a += weights.stft_coef() * b / 2.0;
                    }
                }
            }
        }
        let total = weights.stft_coef() * stft_value + weights.mse_coef() * mse;
        Ok((RirLoss { total, stft: stft_value, mse }, grad))
    }
}

/// Mean `L^ξ` over a batch; accumulates `scale · dL/dθ` into `store`.
pub fn predictor_loss_backward(
    predictor: &Predictor,
    store: &mut ParamStore,
    inputs: &[&PredictionInput],
    targets: &[&RirTarget],
    weights: &PredictionLossWeights,
    stft: &Stft,
    scale: f64,
) -> Result<RirLoss> {
    if inputs.len() != targets.len() {
        return Err(Error::config("inputs and targets differ in count"));
    }
    let cache = predictor.forward(store, inputs)?;
    let batch = inputs.len() as f64;
    let mut d_wave = Tensor2::zeros(inputs.len(), cache.wave.cols());
    let mut mean = RirLoss::default();
    for (b, target) in targets.iter().enumerate() {
        let (loss, grad) = target.loss_with_grad(cache.wave.row(b), weights, stft, scale != 0.0, false)?;
        mean.total += loss.total / batch;
        mean.stft += loss.stft / batch;
        mean.mse += loss.mse / batch;
        if let Some(g) = grad {
            for (d, v) in d_wave.row_mut(b).iter_mut().zip(g) {
                *d = scale * v / batch;
            }
        }
    }
    if scale != 0.0 {
        predictor.backward(store, &cache, &d_wave);
    }
    Ok(mean)
}
