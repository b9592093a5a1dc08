use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderCache, EncoderInput, EncoderWidths, ObsEncoder};
use crate::error::Result;
use crate::learn::{categorical_entropy, softmax_rows, Activation, Dense, DenseOut, Gru, GruOut, ParamStore, Tensor2};
use crate::scene::Action;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub patch_radius: usize,
    pub fov90: bool,
    pub encoder: EncoderWidths,
    pub hidden: usize,
    pub raw_step: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            patch_radius: 3,
            fov90: false,
            encoder: EncoderWidths { vision: 32, azimuth: 8, position: 16 },
            hidden: 64,
            raw_step: false,
        }
    }
}

impl PolicyConfig {
    pub fn patch_len(&self) -> usize {
        (2 * self.patch_radius + 1).pow(2)
    }
}

/// Probabilities over `[MoveForward, TurnLeft, TurnRight, Stop]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDist(pub [f64; 4]);

impl ActionDist {
    pub fn entropy(&self) -> f64 {
        categorical_entropy(&self.0)
    }

    pub fn greedy(&self) -> Action {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }

    pub fn log_prob(&self, a: Action) -> f64 {
        self.0[a.index()].max(f64::MIN_POSITIVE).ln()
    }

    /// `KL(self ‖ other)`.
    pub fn kl(&self, other: &ActionDist) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, q)| p * (p / q.max(f64::MIN_POSITIVE)).ln())
            .sum()
    }
}

/// Inverse-CDF sample from `dist`.
pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDist, rng: &mut R) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.0.iter().enumerate() {
        acc += p;
        if u < acc {
            return Action::ALL[i];
        }
    }
    // Rounding left `u` beyond the cumulative sum: take the last positive entry.
    let last = dist.0.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    Action::ALL[last]
}

/// One agent's encoder, GRU and single-layer actor and critic.
#[derive(Debug, Clone, Copy)]
pub struct AgentNet {
    pub encoder: ObsEncoder,
    pub gru: Gru,
    pub actor: Dense,
    pub critic: Dense,
}

#[derive(Debug, Clone)]
pub struct AgentForward {
    pub encoder: EncoderCache,
    pub gru: GruOut,
    pub actor: DenseOut,
    pub critic: DenseOut,
    pub probs: Tensor2,
}

impl AgentForward {
    pub fn dist(&self, row: usize) -> ActionDist {
        let r = self.probs.row(row);
        ActionDist([r[0], r[1], r[2], r[3]])
    }

    pub fn value(&self, row: usize) -> f64 {
        self.critic.out.get(row, 0)
    }

    pub fn state(&self) -> &Tensor2 {
        &self.gru.out
    }
}

impl AgentNet {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, cfg: &PolicyConfig, rng: &mut R) -> Result<Self> {
        let encoder = ObsEncoder::new(store, &format!("{prefix}.encoder"), cfg.patch_len(), cfg.encoder, rng)?;
        let gru = Gru::new(store, &format!("{prefix}.gru"), cfg.encoder.total(), cfg.hidden, rng)?;
        let actor = Dense::new(store, &format!("{prefix}.actor"), cfg.hidden, 4, Activation::Identity, rng)?;
        let critic = Dense::new(store, &format!("{prefix}.critic"), cfg.hidden, 1, Activation::Identity, rng)?;
        Ok(AgentNet { encoder, gru, actor, critic })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(AgentNet {
            encoder: ObsEncoder::lookup(store, &format!("{prefix}.encoder"))?,
            gru: Gru::lookup(store, &format!("{prefix}.gru"))?,
            actor: Dense::lookup(store, &format!("{prefix}.actor"), Activation::Identity)?,
            critic: Dense::lookup(store, &format!("{prefix}.critic"), Activation::Identity)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.gru.hidden
    }

    /// Encoder → GRU → actor/critic over a batch.
    pub fn forward(&self, store: &ParamStore, input: &EncoderInput, h_prev: &Tensor2) -> Result<AgentForward> {
        let encoder = self.encoder.forward(store, input)?;
        self.forward_embedded(store, encoder, h_prev)
    }

    pub fn forward_embedded(&self, store: &ParamStore, encoder: EncoderCache, h_prev: &Tensor2) -> Result<AgentForward> {
        let gru = self.gru.forward(store, &encoder.out, h_prev)?;
        let actor = self.actor.forward(store, &gru.out)?;
        let critic = self.critic.forward(store, &gru.out)?;
        let probs = softmax_rows(&actor.out);
        Ok(AgentForward { encoder, gru, actor, critic, probs })
    }

    /// Backpropagates `dL/dlogits` and `dL/dV` through the whole agent.
    /// The incoming hidden state is treated as a constant.
    pub fn backward(&self, store: &mut ParamStore, cache: &AgentForward, d_logits: &Tensor2, d_values: &Tensor2) {
        let mut d_state = self.actor.backward(store, &cache.actor, d_logits, true).expect("requested");
        let d_state_critic = self.critic.backward(store, &cache.critic, d_values, true).expect("requested");
        d_state.add_assign(&d_state_critic);
        let (d_embed, _) = self.gru.backward(store, &cache.gru, &d_state, true);
        self.encoder.backward(store, &cache.encoder, &d_embed.expect("requested"));
    }
}

/// Both agents' networks; agent 0 is the emitter, agent 1 the receiver.
#[derive(Debug, Clone, Copy)]
pub struct PolicyNet {
    pub agents: [AgentNet; 2],
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &PolicyConfig, rng: &mut R) -> Result<Self> {
        Ok(PolicyNet {
            agents: [AgentNet::new(store, "policy.agent0", cfg, rng)?, AgentNet::new(store, "policy.agent1", cfg, rng)?],
        })
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        Ok(PolicyNet {
            agents: [AgentNet::lookup(store, "policy.agent0")?, AgentNet::lookup(store, "policy.agent1")?],
        })
    }
}

/// Single-step policy evaluation from an embedding `e_t` and hidden `h_{t-1}`.
pub fn policy_step(store: &ParamStore, agent: &AgentNet, embedding: &Tensor2, h_prev: &Tensor2) -> Result<(ActionDist, f64, Tensor2)> {
    let gru = agent.gru.forward(store, embedding, h_prev)?;
    let logits = agent.actor.forward(store, &gru.out)?.out;
    let value = agent.critic.forward(store, &gru.out)?.out.get(0, 0);
    let p = softmax_rows(&logits);
    Ok((ActionDist([p.get(0, 0), p.get(0, 1), p.get(0, 2), p.get(0, 3)]), value, gru.out))
}
