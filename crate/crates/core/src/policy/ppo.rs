use serde::{Deserialize, Serialize};

use super::encoder::{EncoderInput, ObsFeatures};
use super::gae::{compute_gae, AdvantageMode};
use super::net::{AgentNet, PolicyNet};
use crate::error::{Error, Result};
use crate::learn::{ParamStore, Tensor2};

/// One agent's transition as stored during a rollout.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub features: ObsFeatures,
    /// Hidden state fed into the GRU at this step.
    pub h_prev: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryBuffer {
    pub steps: Vec<StepRecord>,
    /// `V(s_T)` after the last stored step.
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrajectoryBuffer {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn compute_advantages(&mut self, gamma: f64, tau: f64, mode: AdvantageMode) {
        let rewards: Vec<f64> = self.steps.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = self.steps.iter().map(|s| s.value).collect();
        let dones: Vec<bool> = self.steps.iter().map(|s| s.done).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, self.bootstrap_value, gamma, tau, mode);
        self.advantages = adv;
        self.returns = ret;
    }

    /// Concatenates buffers (e.g. from several workers) in order.
    pub fn concat(parts: Vec<TrajectoryBuffer>) -> TrajectoryBuffer {
        let mut out = TrajectoryBuffer::default();
        for p in parts {
            out.steps.extend(p.steps);
            out.advantages.extend(p.advantages);
            out.returns.extend(p.returns);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Motion-loss weights `(w^ω_m, w^ν_m)`.
    pub agent_weights: [f64; 2],
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.1,
            entropy_coef: 0.02,
            value_coef: 0.5,
            agent_weights: [0.5, 0.5],
            normalize_advantages: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentLoss {
    pub value: f64,
    pub policy: f64,
    pub entropy: f64,
    pub total: f64,
    /// Fraction of steps whose ratio left the clip range.
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionLoss {
    pub agents: [AgentLoss; 2],
    pub total: f64,
}

/// Zero-mean, unit-variance advantages (`ε = 1e-8`).
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.is_empty() {
        return Vec::new();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

fn agent_loss(store: &mut ParamStore, net: &AgentNet, buf: &TrajectoryBuffer, cfg: &PpoConfig, weight: f64, scale: f64) -> Result<AgentLoss> {
    if buf.advantages.len() != buf.steps.len() {
        return Err(Error::Training { block: "ppo".into(), msg: "advantages not computed".into() });
    }
    if buf.steps.is_empty() {
        return Ok(AgentLoss::default());
    }
    let n = buf.steps.len();
    let inv_n = 1.0 / n as f64;
    let input = EncoderInput::from_features(buf.steps.iter().map(|s| &s.features))?;
    let h_prev = Tensor2::from_rows(&buf.steps.iter().map(|s| s.h_prev.as_slice()).collect::<Vec<_>>())?;
    let fwd = net.forward(store, &input, &h_prev)?;
    let adv = if cfg.normalize_advantages {
        normalize_advantages(&buf.advantages)
    } else {
        buf.advantages.clone()
    };
    let g = weight * scale;
    let mut out = AgentLoss::default();
    let mut d_logits = Tensor2::zeros(n, 4);
    let mut d_values = Tensor2::zeros(n, 1);
    let mut clipped = 0usize;
    for (t, step) in buf.steps.iter().enumerate() {
        let p = fwd.probs.row(t);
        let a = step.action;
        let logp = p[a].max(f64::MIN_POSITIVE).ln();
        let ratio = (logp - step.log_prob).exp();
        let unclipped = ratio * adv[t];
        let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let clipped_obj = clipped_ratio * adv[t];
        let (surrogate, d_surr_d_ratio) = if unclipped <= clipped_obj {
            (unclipped, adv[t])
        } else {
            clipped += 1;
            (clipped_obj, 0.0)
        };
        let entropy: f64 = -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        let v = fwd.value(t);
        let v_err = v - buf.returns[t];
        out.value += cfg.value_coef * v_err * v_err * inv_n;
        out.policy -= surrogate * inv_n;
        out.entropy += entropy * inv_n;

        d_values.set(t, 0, g * cfg.value_coef * 2.0 * v_err * inv_n);
        // d(-surrogate)/dlogp = -dsurr/dratio * ratio
        let d_logp = -g * d_surr_d_ratio * ratio * inv_n;
        let d_entropy = -g * cfg.entropy_coef * inv_n;
        for k in 0..4 {
            let onehot = if k == a { 1.0 } else { 0.0 };
            let dh_dlogit = if p[k] > 0.0 { -p[k] * (p[k].ln() + entropy) } else { 0.0 };
            d_logits.set(t, k, d_logp * (onehot - p[k]) + d_entropy * dh_dlogit);
        }
    }
    out.total = out.value + out.policy - cfg.entropy_coef * out.entropy;
    out.clip_fraction = clipped as f64 * inv_n;
    if scale != 0.0 {
        net.backward(store, &fwd, &d_logits, &d_values);
    }
    Ok(out)
}

/// `L^m = w^ω_m L^ω_m + w^ν_m L^ν_m` where each agent's loss is
/// `c_v·mean (V − R)² − mean min(ρÂ, clip(ρ)Â) − β·mean H`.
///
/// Gradients of `scale · L^m` are accumulated into `store`; pass
/// `scale = 0` to evaluate without touching gradients.
pub fn ppo_motion_loss(store: &mut ParamStore, net: &PolicyNet, buffers: [&TrajectoryBuffer; 2], cfg: &PpoConfig, scale: f64) -> Result<MotionLoss> {
    let mut out = MotionLoss::default();
    for j in 0..2 {
        let w = cfg.agent_weights[j];
        out.agents[j] = agent_loss(store, &net.agents[j], buffers[j], cfg, w, scale)?;
        out.total += w * out.agents[j].total;
    }
    Ok(out)
}
