//! Environmental reward and its assignment to the two agents.
//!
//! The reward at step `t` is the sum of four first differences of episode
//! state levels: prediction accuracy `ξ = -Δ`, coverage `ζ`, hull perimeter
//! `ψ` and hull area `φ`, each scaled by its coefficient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{softmax_rows, Activation, Dense, DenseOut, ParamStore, Tensor2};
use crate::scene::HullStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardCoefs {
    pub xi: f64,
    pub zeta: f64,
    pub psi: f64,
    pub phi: f64,
}

impl Default for RewardCoefs {
    fn default() -> Self {
        RewardCoefs { xi: 1.0, zeta: 1.0, psi: -1.0, phi: 1.0 }
    }
}

/// Episode state levels at one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepLevels {
    /// STFT distance `Δ_t` of the forward-direction prediction.
    pub delta: f64,
    pub coverage: f64,
    pub perimeter: f64,
    pub area: f64,
}

impl StepLevels {
    pub fn new(delta: f64, coverage: f64, hull: HullStats) -> Self {
        StepLevels { delta, coverage, perimeter: hull.perimeter, area: hull.area }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_xi: f64,
    pub r_zeta: f64,
    pub r_psi: f64,
    pub r_phi: f64,
    pub total: f64,
    /// Levels of the previous step the differences were taken against.
    pub previous: StepLevels,
}

/// Reward of step `t` from the levels at `t` and `t - 1`.
pub fn step_reward(coefs: &RewardCoefs, current: &StepLevels, previous: &StepLevels) -> RewardBreakdown {
    let xi_t = -current.delta;
    let xi_prev = -previous.delta;
    let r_xi = coefs.xi * (xi_t - xi_prev);
    let r_zeta = coefs.zeta * (current.coverage - previous.coverage);
    let r_psi = coefs.psi * (current.perimeter - previous.perimeter);
    let r_phi = coefs.phi * (current.area - previous.area);
    RewardBreakdown {
        r_xi,
        r_zeta,
        r_psi,
        r_phi,
        total: r_xi + r_zeta + r_psi + r_phi,
        previous: *previous,
    }
}

/// Per-episode reward state: the first observation seeds the cache and
/// yields a zero reward.
#[derive(Debug, Clone)]
pub struct RewardTracker {
    coefs: RewardCoefs,
    previous: Option<StepLevels>,
}

impl RewardTracker {
    pub fn new(coefs: RewardCoefs) -> Self {
        RewardTracker { coefs, previous: None }
    }

    pub fn observe(&mut self, levels: StepLevels) -> RewardBreakdown {
        let out = match &self.previous {
            None => RewardBreakdown { previous: levels, ..Default::default() },
            Some(prev) => step_reward(&self.coefs, &levels, prev),
        };
        self.previous = Some(levels);
        out
    }

    pub fn previous(&self) -> Option<&StepLevels> {
        self.previous.as_ref()
    }
}

/// How the shared reward is split between the agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AssignmentMode {
    /// Both agents receive the full reward (`ρ = -1`).
    FullShared,
    /// Each agent receives `(1 - ρ) / 2` of the reward.
    Fixed(f64),
    /// `ρ^j = (1 - ρ) / 2 + ρ · ρ_R^j` with `ρ_R` from a learned softmax head.
    Learned(f64),
}

impl AssignmentMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AssignmentMode::FullShared => Ok(()),
            AssignmentMode::Fixed(rho) | AssignmentMode::Learned(rho) => {
                if (0.0..=1.0).contains(&rho) {
                    Ok(())
                } else {
                    Err(Error::config(format!("reward allocation ρ = {rho} outside [0, 1]")))
                }
            }
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, AssignmentMode::Learned(_))
    }
}

/// Shares of one step's reward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub r_omega: f64,
    pub r_nu: f64,
    /// `(r - r^ω - r^ν)²`; zero outside the learned mode.
    pub sigma_loss: f64,
    /// Learned weights `(ρ_R^ω, ρ_R^ν)` when applicable.
    pub learned_weights: Option<(f64, f64)>,
}

fn blended(rho: f64, rho_r: f64) -> f64 {
    (1.0 - rho) / 2.0 + rho_r * rho
}

/// Splits `reward` between the agents. `learned_weights` must be given in
/// the learned mode.
pub fn assign_rewards(mode: AssignmentMode, reward: f64, learned_weights: Option<(f64, f64)>) -> Result<Assignment> {
    mode.validate()?;
    match mode {
        AssignmentMode::FullShared => Ok(Assignment { r_omega: reward, r_nu: reward, ..Default::default() }),
        AssignmentMode::Fixed(rho) => {
            let share = reward * (1.0 - rho) / 2.0;
            Ok(Assignment { r_omega: share, r_nu: share, ..Default::default() })
        }
        AssignmentMode::Learned(rho) => {
            let (wo, wn) = learned_weights.ok_or_else(|| Error::config("learned assignment requires head weights"))?;
            let r_omega = reward * blended(rho, wo);
            let r_nu = reward * blended(rho, wn);
            Ok(Assignment {
                r_omega,
                r_nu,
                sigma_loss: (reward - r_omega - r_nu).powi(2),
                learned_weights: Some((wo, wn)),
            })
        }
    }
}

/// MLP mapping `(s^ω, s^ν, r)` to the softmax pair `(ρ_R^ω, ρ_R^ν)`.
#[derive(Debug, Clone, Copy)]
pub struct AssignmentHead {
    pub hidden: Dense,
    pub out: Dense,
    pub state_width: usize,
}

#[derive(Debug, Clone)]
pub struct AssignmentCache {
    hidden: DenseOut,
    out: DenseOut,
    pub weights: Tensor2,
}

pub const ASSIGN_HIDDEN: usize = 32;

impl AssignmentHead {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, state_width: usize, rng: &mut R) -> Result<Self> {
        Ok(AssignmentHead {
            hidden: Dense::new(store, &format!("{prefix}.hidden"), 2 * state_width + 1, ASSIGN_HIDDEN, Activation::Tanh, rng)?,
            out: Dense::new(store, &format!("{prefix}.out"), ASSIGN_HIDDEN, 2, Activation::Identity, rng)?,
            state_width,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let hidden = Dense::lookup(store, &format!("{prefix}.hidden"), Activation::Tanh)?;
        let out = Dense::lookup(store, &format!("{prefix}.out"), Activation::Identity)?;
        Ok(AssignmentHead { hidden, out, state_width: (hidden.inputs - 1) / 2 })
    }

    /// Batched forward; each input row is `[s^ω, s^ν, r]`.
    pub fn forward(&self, store: &ParamStore, inputs: &Tensor2) -> Result<AssignmentCache> {
        let hidden = self.hidden.forward(store, inputs)?;
        let out = self.out.forward(store, &hidden.out)?;
        let weights = softmax_rows(&out.out);
        Ok(AssignmentCache { hidden, out, weights })
    }

    pub fn weights(&self, store: &ParamStore, s_omega: &[f64], s_nu: &[f64], reward: f64) -> Result<(f64, f64)> {
        let mut row = Vec::with_capacity(2 * self.state_width + 1);
        row.extend_from_slice(s_omega);
        row.extend_from_slice(s_nu);
        row.push(reward);
        let cache = self.forward(store, &Tensor2::row_vector(&row))?;
        Ok((cache.weights.get(0, 0), cache.weights.get(0, 1)))
    }

    /// Backpropagates `dL/dρ_R` (batch x 2) into the head parameters.
    pub fn backward(&self, store: &mut ParamStore, cache: &AssignmentCache, d_weights: &Tensor2) {
        let p = &cache.weights;
        let mut d_logits = Tensor2::zeros(p.rows(), 2);
        for i in 0..p.rows() {
            let dot = p.get(i, 0) * d_weights.get(i, 0) + p.get(i, 1) * d_weights.get(i, 1);
            for k in 0..2 {
                d_logits.set(i, k, p.get(i, k) * (d_weights.get(i, k) - dot));
            }
        }
        let d_hidden = self.out.backward(store, &cache.out, &d_logits, true).expect("requested");
        self.hidden.backward(store, &cache.hidden, &d_hidden, false);
    }

    /// Mean `L^σ` over a batch and its gradient into the head.
    pub fn sigma_loss_backward(&self, store: &mut ParamStore, inputs: &Tensor2, rewards: &[f64], rho: f64, scale: f64) -> Result<f64> {
        let cache = self.forward(store, inputs)?;
        let n = rewards.len().max(1) as f64;
        let mut loss = 0.0;
        let mut d_w = Tensor2::zeros(rewards.len(), 2);
        for (i, &r) in rewards.iter().enumerate() {
            let ro = r * blended(rho, cache.weights.get(i, 0));
            let rn = r * blended(rho, cache.weights.get(i, 1));
            let resid = r - ro - rn;
            loss += resid * resid / n;
            let d = scale * 2.0 * resid * (-r * rho) / n;
            d_w.set(i, 0, d);
            d_w.set(i, 1, d);
        }
        self.backward(store, &cache, &d_w);
        Ok(loss)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Whether the joint argmax of `w^ω Q^ω(a) + w^ν Q^ν(b)` over all action
/// pairs equals the pair of per-agent argmaxes.
pub fn monotone_decomposition_check(q_omega: &[f64], q_nu: &[f64], w_omega: f64, w_nu: f64) -> bool {
    let mut best = (0, 0);
    let mut best_value = f64::NEG_INFINITY;
    for (a, qa) in q_omega.iter().enumerate() {
        for (b, qb) in q_nu.iter().enumerate() {
            let v = w_omega * qa + w_nu * qb;
            if v > best_value {
                best_value = v;
                best = (a, b);
            }
        }
    }
    best == (argmax(q_omega), argmax(q_nu))
}
