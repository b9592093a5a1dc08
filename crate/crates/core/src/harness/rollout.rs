//! Action selection and per-worker rollout collection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::acoustics::BinauralRIR;
use crate::baselines::{curiosity_policy, occupancy_policy, random_policy};
use crate::error::Result;
use crate::learn::{ParamStore, Tensor2};
use crate::policy::{sample_action, ActionDist, EncoderInput, ObsFeatures, PolicyNet, StepRecord, TrajectoryBuffer};
use crate::predictor::PredictionInput;
use crate::rewards::{assign_rewards, AssignmentHead, AssignmentMode};
use crate::scene::{Action, NavScene};

use super::env::{random_start, EnvContext, Episode, Measurement, PredictSource};

/// How actions are chosen.
#[derive(Debug, Clone, Copy)]
pub enum Driver<'a> {
    Policy { net: &'a PolicyNet, store: &'a ParamStore, greedy: bool },
    Random,
    Occupancy,
    Curiosity,
}

/// One agent's policy decision.
#[derive(Debug, Clone)]
pub struct Decision {
    pub action: Action,
    pub dist: ActionDist,
    pub value: f64,
    pub h_prev: Vec<f64>,
    pub h_next: Vec<f64>,
}

/// Runs one agent's network on a single observation.
pub fn decide<R: Rng + ?Sized>(
    net: &PolicyNet,
    store: &ParamStore,
    agent: usize,
    features: &ObsFeatures,
    h_prev: &[f64],
    greedy: bool,
    rng: &mut R,
) -> Result<Decision> {
    let input = EncoderInput::from_features([features])?;
    let fwd = net.agents[agent].forward(store, &input, &Tensor2::row_vector(h_prev))?;
    let dist = fwd.dist(0);
    let action = if greedy { dist.greedy() } else { sample_action(&dist, rng) };
    Ok(Decision { action, dist, value: fwd.value(0), h_prev: h_prev.to_vec(), h_next: fwd.state().row(0).to_vec() })
}

/// Per-episode action state carried alongside an [`Episode`].
#[derive(Debug, Clone)]
pub struct Actor {
    pub hidden: [Vec<f64>; 2],
}

impl Actor {
    pub fn new(hidden: usize) -> Self {
        Actor { hidden: [vec![0.0; hidden], vec![0.0; hidden]] }
    }

    /// Chooses both actions. Policy decisions are returned for agents that
    /// are still active; stopped agents get `Stop` and no decision.
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        ctx: EnvContext<'_>,
        driver: Driver<'_>,
        ep: &Episode<'_>,
        rng: &mut R,
    ) -> Result<([Action; 2], [Option<Decision>; 2])> {
        let mut actions = [Action::Stop; 2];
        let mut decisions: [Option<Decision>; 2] = [None, None];
        match driver {
            Driver::Policy { net, store, greedy } => {
                let feats = ep.features(ctx);
                for j in 0..2 {
                    if ep.agents[j].stopped {
                        continue;
                    }
                    let d = decide(net, store, j, &feats[j], &self.hidden[j], greedy, rng)?;
                    self.hidden[j] = d.h_next.clone();
                    actions[j] = d.action;
                    decisions[j] = Some(d);
                }
            }
            Driver::Random => {
                for a in &mut actions {
                    *a = random_policy(rng, ep.t, ctx.cfg.max_steps);
                }
            }
            Driver::Occupancy => actions = occupancy_policy(ep.scene, ep.poses()),
            Driver::Curiosity => {
                for (j, a) in actions.iter_mut().enumerate() {
                    *a = curiosity_policy(ep.scene, ep.agents[j].pose, ep.coverage.visited(), rng);
                }
            }
        }
        Ok((actions, decisions))
    }
}

/// A ground-truth response with the generator query that should produce it.
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub input: PredictionInput,
    pub truth: BinauralRIR,
}

fn push_measurement(records: &mut Vec<PredictionRecord>, m: Measurement) {
    records.push(PredictionRecord { input: m.forward, truth: m.forward_truth });
    records.push(PredictionRecord { input: m.reverse, truth: m.reverse_truth });
}

/// What a worker collected during one rollout.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    pub buffers: [TrajectoryBuffer; 2],
    pub records: Vec<PredictionRecord>,
    /// Assignment-head rows `[s^ω, s^ν, r]` and their rewards.
    pub assign_rows: Vec<Vec<f64>>,
    pub assign_rewards: Vec<f64>,
    /// Total-reward returns of episodes finished in this rollout.
    pub episode_returns: Vec<f64>,
    pub steps: usize,
}

/// The models a training rollout reads.
#[derive(Debug, Clone, Copy)]
pub struct Models<'a> {
    pub policy: Option<(&'a PolicyNet, &'a ParamStore)>,
    pub predictor: PredictSource<'a>,
    pub assign: Option<(&'a AssignmentHead, &'a ParamStore)>,
}

/// A rollout worker with its own RNG and a persistent episode that may
/// span several rollouts.
#[derive(Debug)]
pub struct Worker<'s> {
    pub rng: ChaCha8Rng,
    scenes: &'s [NavScene],
    episode: Option<Episode<'s>>,
    actor: Actor,
    episode_return: f64,
}

impl<'s> Worker<'s> {
    pub fn new(rng: ChaCha8Rng, scenes: &'s [NavScene], hidden: usize) -> Self {
        Worker { rng, scenes, episode: None, actor: Actor::new(hidden), episode_return: 0.0 }
    }

    fn begin(&mut self, ctx: EnvContext<'_>, models: &Models<'_>, out: &mut Rollout) -> Result<()> {
        let idx = self.rng.random_range(0..self.scenes.len());
        let scene = &self.scenes[idx];
        let start = random_start(scene, &mut self.rng);
        let (ep, m) = Episode::start(ctx, scene, idx, start, models.predictor, ctx.cfg.reward)?;
        push_measurement(&mut out.records, m);
        self.episode = Some(ep);
        self.actor = Actor::new(ctx.cfg.hidden);
        self.episode_return = 0.0;
        Ok(())
    }

    /// Collects `n_steps` environment steps. Without a policy the agents
    /// move at random and no trajectories are recorded.
    pub fn collect(&mut self, ctx: EnvContext<'_>, models: &Models<'_>, n_steps: usize) -> Result<Rollout> {
        let mut out = Rollout::default();
        let driver = match models.policy {
            Some((net, store)) => Driver::Policy { net, store, greedy: false },
            None => Driver::Random,
        };
        for _ in 0..n_steps {
            if self.episode.is_none() {
                self.begin(ctx, models, &mut out)?;
            }
            let ep = self.episode.as_mut().expect("episode started");
            let (actions, decisions) = self.actor.act(ctx, driver, ep, &mut self.rng)?;
            let features = ep.features(ctx);
            let outcome = ep.step(ctx, actions, models.predictor)?;
            let r = outcome.reward.total;
            let learned = match (ctx.cfg.assignment, models.assign) {
                (AssignmentMode::Learned(_), Some((head, store))) => {
                    let mut row = self.actor.hidden[0].clone();
                    row.extend_from_slice(&self.actor.hidden[1]);
                    row.push(r);
                    let w = head.weights(store, &self.actor.hidden[0], &self.actor.hidden[1], r)?;
                    out.assign_rows.push(row);
                    out.assign_rewards.push(r);
                    Some(w)
                }
                _ => None,
            };
            let shares = assign_rewards(ctx.cfg.assignment, r, learned)?;
            let share = [shares.r_omega, shares.r_nu];
            for j in 0..2 {
                if let Some(d) = &decisions[j] {
                    out.buffers[j].steps.push(StepRecord {
                        features: features[j].clone(),
                        h_prev: d.h_prev.clone(),
                        action: d.action.index(),
                        log_prob: d.dist.0[d.action.index()].max(f64::MIN_POSITIVE).ln(),
                        value: d.value,
                        reward: share[j],
                        done: outcome.done || d.action == Action::Stop,
                    });
                }
            }
            push_measurement(&mut out.records, outcome.measurement);
            self.episode_return += r;
            out.steps += 1;
            if outcome.done {
                out.episode_returns.push(self.episode_return);
                self.episode = None;
            }
        }
        // Bootstrap values for agents still acting in an unfinished episode.
        if let (Some(ep), Some((net, store))) = (&self.episode, models.policy) {
            let feats = ep.features(ctx);
            for j in 0..2 {
                if !ep.agents[j].stopped {
                    let input = EncoderInput::from_features([&feats[j]])?;
                    let fwd = net.agents[j].forward(store, &input, &Tensor2::row_vector(&self.actor.hidden[j]))?;
                    out.buffers[j].bootstrap_value = fwd.value(0);
                }
            }
        }
        Ok(out)
    }
}
