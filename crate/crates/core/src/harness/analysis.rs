//! Modality interventions: how much each observation block moves the
//! action distribution, and how much it moves the prediction error.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy::ObsFeatures;
use crate::scene::NavScene;
use crate::spectral::Stft;

use super::config::RunConfig;
use super::env::{random_start, EnvContext, Episode};
use super::eval::{episode_rngs, evaluate, EvalOptions, ModelKind};
use super::rollout::decide;
use super::train::{stream_rng, TrainedModels, STREAM_ANALYSIS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Vision,
    Azimuth,
    Position,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Vision, Modality::Azimuth, Modality::Position];

    pub fn tag(self) -> &'static str {
        match self {
            Modality::Vision => "vision",
            Modality::Azimuth => "azimuth",
            Modality::Position => "position",
        }
    }
}

/// Replaces one modality with standard-normal noise. The noise depends only
/// on `(seed, step, agent)`, so repeated reads of one step agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub modality: Modality,
    pub seed: u64,
}

impl Intervention {
    pub fn apply(&self, f: &mut ObsFeatures, step: usize, agent: usize) {
        let mut rng = stream_rng(self.seed, STREAM_ANALYSIS, ((step as u64) << 2) | agent as u64);
        let block: &mut [f64] = match self.modality {
            Modality::Vision => &mut f.vision,
            Modality::Azimuth => &mut f.azimuth,
            Modality::Position => &mut f.position,
        };
        for v in block {
            *v = rng.sample(StandardNormal);
        }
    }
}

/// `d_m / Σ d`; an all-zero input (no modality matters) maps to equal
/// shares so rows still sum to one.
pub fn normalize_importance(d: [f64; 3]) -> [f64; 3] {
    let sum: f64 = d.iter().sum();
    if sum > 0.0 {
        d.map(|v| v / sum)
    } else {
        [1.0 / 3.0; 3]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub seed: u64,
    pub scene: usize,
    pub episode: usize,
    pub t: usize,
    pub agent: usize,
    /// `KL(original ‖ intervened)` per modality.
    pub raw: [f64; 3],
    pub normalized: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionImportance {
    pub rows: Vec<ImportanceRow>,
    /// Per agent, mean of the normalized rows.
    pub mean: [[f64; 3]; 2],
}

/// Runs the trained policy on `scenes` (seeds and episode counts from the
/// config) and scores every step of every active agent.
pub fn action_intervention(cfg: &RunConfig, scenes: &[NavScene], models: &TrainedModels) -> Result<ActionImportance> {
    let stft = Stft::new(cfg.stft)?;
    let ctx = EnvContext { cfg, stft: &stft };
    let source = models.predict_source();
    let (net, store) = (&models.policy, &models.policy_store);
    let mut rows = Vec::new();
    for &seed in &cfg.eval_seeds {
        for (si, scene) in scenes.iter().enumerate() {
            for e in 0..cfg.episodes {
                let (mut start_rng, mut rng) = episode_rngs(seed, si, e);
                let noise_seed = seed ^ ((si as u64) << 32 | e as u64);
                let (mut ep, _) = Episode::start(ctx, scene, si, random_start(scene, &mut start_rng), source, cfg.reward)?;
                let mut hidden = [vec![0.0; cfg.hidden], vec![0.0; cfg.hidden]];
                while !ep.is_done(cfg.max_steps) {
                    let feats = ep.features(ctx);
                    let mut actions = [crate::scene::Action::Stop; 2];
                    for j in 0..2 {
                        if ep.agents[j].stopped {
                            continue;
                        }
                        let orig = decide(net, store, j, &feats[j], &hidden[j], false, &mut rng)?;
                        let mut raw = [0.0; 3];
                        for (k, m) in Modality::ALL.into_iter().enumerate() {
                            let mut f = feats[j].clone();
                            Intervention { modality: m, seed: noise_seed }.apply(&mut f, ep.t, j);
                            let d = decide(net, store, j, &f, &hidden[j], true, &mut rng)?;
                            raw[k] = orig.dist.kl(&d.dist).max(0.0);
                        }
                        rows.push(ImportanceRow { seed, scene: si, episode: e, t: ep.t, agent: j, raw, normalized: normalize_importance(raw) });
                        actions[j] = orig.action;
                        hidden[j] = orig.h_next;
                    }
                    ep.step(ctx, actions, source)?;
                }
            }
        }
    }
    let mut mean = [[0.0; 3]; 2];
    for (j, m) in mean.iter_mut().enumerate() {
        let mine: Vec<&ImportanceRow> = rows.iter().filter(|r| r.agent == j).collect();
        if !mine.is_empty() {
            for k in 0..3 {
                m[k] = mine.iter().map(|r| r.normalized[k]).sum::<f64>() / mine.len() as f64;
            }
        }
    }
    Ok(ActionImportance { rows, mean })
}

impl ActionImportance {
    pub fn write_rows_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "seed,scene,episode,t,agent,d_vision,d_azimuth,d_position,n_vision,n_azimuth,n_position")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{:.9},{:.9},{:.9},{:.6},{:.6},{:.6}",
                r.seed, r.scene, r.episode, r.t, r.agent, r.raw[0], r.raw[1], r.raw[2], r.normalized[0], r.normalized[1], r.normalized[2]
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "agent,vision,azimuth,position")?;
        for (j, m) in self.mean.iter().enumerate() {
            writeln!(w, "{j},{:.6},{:.6},{:.6}", m[0], m[1], m[2])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeImportance {
    pub base_pe: f64,
    /// Mean PE with each modality replaced by noise.
    pub pe: [f64; 3],
    /// `|PE(m) − PE|`.
    pub delta: [f64; 3],
    pub normalized: [f64; 3],
}

impl PeImportance {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "modality,pe,delta_pe,normalized")?;
        writeln!(w, "none,{:.6},0,0", self.base_pe)?;
        for (k, m) in Modality::ALL.into_iter().enumerate() {
            writeln!(w, "{},{:.6},{:.6},{:.6}", m.tag(), self.pe[k], self.delta[k], self.normalized[k])?;
        }
        Ok(())
    }
}

/// Evaluates the trained model with and without each intervention (both
/// policy and predictor see the corrupted observation).
pub fn pe_intervention(cfg: &RunConfig, scenes: &[NavScene], models: &TrainedModels) -> Result<PeImportance> {
    let opts = EvalOptions { waveform_metrics: false, ..Default::default() };
    let base_pe = evaluate(cfg, scenes, models, ModelKind::Trained, None, opts)?.report.summary().pe.mean;
    let mut pe = [0.0; 3];
    for (k, m) in Modality::ALL.into_iter().enumerate() {
        let iv = Intervention { modality: m, seed: cfg.seed };
        let o = EvalOptions { intervention: Some(iv), ..opts };
        pe[k] = evaluate(cfg, scenes, models, ModelKind::Trained, None, o)?.report.summary().pe.mean;
    }
    let delta = pe.map(|v| (v - base_pe).abs());
    Ok(PeImportance { base_pe, pe, delta, normalized: normalize_importance(delta) })
}
