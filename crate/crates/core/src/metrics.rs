//! Evaluation metrics: coverage, prediction error, weighted coverage,
//! reverberation-time error and signal-to-distortion ratio.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::acoustics::BinauralRIR;
use crate::error::{Error, Result};

/// Upper bound reported by [`sisdr`] when the error is negligible.
pub const SISDR_CAP_DB: f64 = 120.0;

/// Default weight of the prediction term in WCR.
pub const WCR_LAMBDA: f64 = 0.1;

/// Unique visited nodes over scene nodes.
pub fn coverage_rate<I>(visited_nodes: I, node_count: usize) -> f64
where
    I: IntoIterator<Item = usize>,
{
    if node_count == 0 {
        return 0.0;
    }
    let mut seen = vec![false; node_count];
    let mut count = 0;
    for n in visited_nodes {
        if n < node_count && !seen[n] {
            seen[n] = true;
            count += 1;
        }
    }
    count as f64 / node_count as f64
}

/// `2 / (1 + e^{-PE}) − 1`.
pub fn pes(pe: f64) -> f64 {
    2.0 / (1.0 + (-pe).exp()) - 1.0
}

/// `(1 − λ)·CR + λ·(1 − PES)`.
pub fn wcr(cr: f64, pe: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * cr + lambda * (1.0 - pes(pe))
}

/// Schroeder decay curve in dB, normalized to 0 at the first sample.
pub fn schroeder_decay_db(h: &[f64]) -> Vec<f64> {
    let mut energy = vec![0.0; h.len()];
    let mut acc = 0.0;
    for i in (0..h.len()).rev() {
        acc += h[i] * h[i];
        energy[i] = acc;
    }
    let total = acc;
    energy
        .iter()
        .map(|&e| if e > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Reverberation time in seconds from a T30 fit over the −5…−35 dB span of
/// the Schroeder curve, extrapolated to 60 dB.
pub fn rt60(h: &[f64], sample_rate: u32) -> Result<f64> {
    if !h.iter().any(|&v| v != 0.0) {
        return Err(Error::Metric("RT60 of an all-zero response".into()));
    }
    let decay = schroeder_decay_db(h);
    let start = decay.iter().position(|&d| d <= -5.0);
    let end = decay.iter().position(|&d| d <= -35.0);
    let (start, end) = match (start, end) {
        (Some(s), Some(e)) if e > s + 1 => (s, e),
        _ => return Err(Error::Metric("decay never reaches -35 dB".into())),
    };
    let fs = sample_rate as f64;
    let n = (end - start) as f64;
    let (mut st, mut sd, mut stt, mut std_) = (0.0, 0.0, 0.0, 0.0);
    for (i, &d) in decay.iter().enumerate().take(end).skip(start) {
        let t = i as f64 / fs;
        st += t;
        sd += d;
        stt += t * t;
        std_ += t * d;
    }
    let slope = (n * std_ - st * sd) / (n * stt - st * st);
    if !(slope < 0.0) {
        return Err(Error::Metric("non-decaying energy curve".into()));
    }
    Ok(-60.0 / slope)
}

/// `|RT60(W) − RT60(Ŵ)|` averaged over both channels, in milliseconds.
pub fn rte(truth: &BinauralRIR, pred: &BinauralRIR) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::domain("RIR length mismatch"));
    }
    let mut total = 0.0;
    for c in 0..2 {
        let a = rt60(&truth.channel_f64(c), truth.sample_rate)?;
        let b = rt60(&pred.channel_f64(c), pred.sample_rate)?;
        total += (a - b).abs();
    }
    Ok(1000.0 * total / 2.0)
}

/// `10·log10(‖W‖² / ‖Ŵ − W‖²)`, capped at [`SISDR_CAP_DB`].
///
/// With `si_projection` the target is first replaced by its optimal-scale
/// projection `αW`, `α = ⟨Ŵ, W⟩ / ‖W‖²` (the conventional scale-invariant form).
pub fn sisdr(truth: &[f64], pred: &[f64], si_projection: bool) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::domain("signal length mismatch"));
    }
    let energy: f64 = truth.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(Error::domain("SiSDR of an all-zero reference"));
    }
    let alpha = if si_projection {
        truth.iter().zip(pred).map(|(t, p)| t * p).sum::<f64>() / energy
    } else {
        1.0
    };
    let target_energy = alpha * alpha * energy;
    let err: f64 = truth.iter().zip(pred).map(|(t, p)| (p - alpha * t).powi(2)).sum();
    if err < 1e-12 * target_energy {
        return Ok(SISDR_CAP_DB);
    }
    if target_energy == 0.0 {
        return Ok(-SISDR_CAP_DB);
    }
    Ok((10.0 * (target_energy / err).log10()).min(SISDR_CAP_DB))
}

/// [`sisdr`] on the concatenated two-channel waveform.
pub fn sisdr_rir(truth: &BinauralRIR, pred: &BinauralRIR, si_projection: bool) -> Result<f64> {
    sisdr(&truth.to_f64(), &pred.to_f64(), si_projection)
}

/// Metrics for one evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub model: String,
    pub scene: usize,
    pub seed: u64,
    pub episode: usize,
    pub cr: f64,
    /// Mean forward-direction `Δ` over the episode's steps.
    pub pe: f64,
    pub pes: f64,
    pub wcr: f64,
    /// `None` when RT60 could not be estimated at any step.
    pub rte_ms: Option<f64>,
    pub sisdr_db: f64,
    /// Steps whose RT60 estimate failed.
    pub rte_skipped: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Population standard deviation; empty input gives NaN mean.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        MeanStd { mean, std: var.sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub model: String,
    pub lambda: f64,
    pub wcr: MeanStd,
    pub pe: MeanStd,
    pub cr: MeanStd,
    pub rte_ms: MeanStd,
    pub sisdr_db: MeanStd,
    pub rte_skipped: usize,
}

const CSV_HEADER: &str = "model,scene,seed,episode,cr,pe,pes,wcr,rte_ms,sisdr_db,rte_skipped";

/// Per-episode rows plus aggregates. Seed-level statistics are taken over
/// per-seed means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub lambda: f64,
    pub episodes: Vec<EpisodeMetrics>,
}

impl MetricsReport {
    pub fn new(lambda: f64) -> Self {
        MetricsReport { lambda, episodes: Vec::new() }
    }

    pub fn push(&mut self, row: EpisodeMetrics) {
        self.episodes.push(row);
    }

    fn seed_means(&self, f: impl Fn(&EpisodeMetrics) -> Option<f64>) -> Vec<f64> {
        let mut seeds: Vec<u64> = self.episodes.iter().map(|e| e.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        seeds
            .iter()
            .filter_map(|&s| {
                let vals: Vec<f64> = self.episodes.iter().filter(|e| e.seed == s).filter_map(&f).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            model: self.episodes.first().map(|e| e.model.clone()).unwrap_or_default(),
            lambda: self.lambda,
            wcr: MeanStd::of(&self.seed_means(|e| Some(e.wcr))),
            pe: MeanStd::of(&self.seed_means(|e| Some(e.pe))),
            cr: MeanStd::of(&self.seed_means(|e| Some(e.cr))),
            rte_ms: MeanStd::of(&self.seed_means(|e| e.rte_ms)),
            sisdr_db: MeanStd::of(&self.seed_means(|e| Some(e.sisdr_db))),
            rte_skipped: self.episodes.iter().map(|e| e.rte_skipped).sum(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for e in &self.episodes {
            let rte = e.rte_ms.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{}",
                e.model, e.scene, e.seed, e.episode, e.cr, e.pe, e.pes, e.wcr, rte, e.sisdr_db, e.rte_skipped
            )?;
        }
        Ok(())
    }

    /// Parses the output of [`MetricsReport::write_csv`].
    pub fn read_csv(text: &str, lambda: f64) -> Result<Self> {
        let mut report = MetricsReport::new(lambda);
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Format("metrics CSV: missing or unexpected header".into())),
        }
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("metrics CSV line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(bad("field count"));
            }
            let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
            report.push(EpisodeMetrics {
                model: f[0].to_string(),
                scene: f[1].parse().map_err(|_| bad("scene"))?,
                seed: f[2].parse().map_err(|_| bad("seed"))?,
                episode: f[3].parse().map_err(|_| bad("episode"))?,
                cr: num(4, "cr")?,
                pe: num(5, "pe")?,
                pes: num(6, "pes")?,
                wcr: num(7, "wcr")?,
                rte_ms: if f[8].is_empty() { None } else { Some(num(8, "rte")?) },
                sisdr_db: num(9, "sisdr")?,
                rte_skipped: f[10].parse().map_err(|_| bad("rte_skipped"))?,
            });
        }
        Ok(report)
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}
