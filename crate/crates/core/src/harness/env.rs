//! One two-agent episode: poses, observations, ground-truth responses,
//! predictions and the reward levels.

use rand::Rng;

use crate::acoustics::{image_source_rir, BinauralRIR, Listener};
use crate::baselines::{nearest_neighbor_predict, LatentRecord};
use crate::error::{Error, Result};
use crate::learn::ParamStore;
use crate::policy::{ObsFeatures, Observation};
use crate::predictor::{MemoryBank, PredictionInput, PredictionLossWeights, Predictor, RirTarget};
use crate::rewards::{RewardBreakdown, RewardCoefs, RewardTracker, StepLevels};
use crate::scene::{egocentric_patch, hull_stats, Action, Agent, AgentPose, CoverageTracker, Heading, HullStats, NavScene};
use crate::spectral::Stft;

use super::analysis::Intervention;
use super::config::RunConfig;

/// Read-only state shared by every episode of a run.
#[derive(Debug, Clone, Copy)]
pub struct EnvContext<'a> {
    pub cfg: &'a RunConfig,
    pub stft: &'a Stft,
}

/// Stored latents and responses for the nearest-neighbor predictor.
#[derive(Debug, Clone, Default)]
pub struct NnBank {
    pub records: Vec<LatentRecord>,
    pub responses: Vec<BinauralRIR>,
}

/// Where step predictions come from.
#[derive(Debug, Clone, Copy)]
pub enum PredictSource<'a> {
    Generator(&'a Predictor, &'a ParamStore),
    /// Latents still come from the encoders; the response is looked up.
    Nearest(&'a Predictor, &'a ParamStore, &'a NnBank),
}

impl PredictSource<'_> {
    /// Forward prediction (`2L` samples) and the latent `f_r ⊕ f_m`.
    pub fn predict(&self, input: &PredictionInput) -> Result<(Vec<f64>, Vec<f64>)> {
        let (model, store) = match *self {
            PredictSource::Generator(m, s) | PredictSource::Nearest(m, s, _) => (m, s),
        };
        let cache = model.forward(store, &[input])?;
        let latent = cache.latent.row(0).to_vec();
        let wave = match self {
            PredictSource::Generator(..) => cache.wave.row(0).to_vec(),
            PredictSource::Nearest(_, _, bank) => {
                let rir = nearest_neighbor_predict(&latent, &bank.records, &bank.responses)?;
                if rir.len() != model.cfg.rir_length {
                    return Err(Error::domain("nearest-neighbor response length differs from the configuration"));
                }
                rir.to_f64()
            }
        };
        Ok((wave, latent))
    }
}

/// Image-source response from the node of `source` to a listener at
/// `listener` facing its heading.
pub fn ground_truth(scene: &NavScene, source_node: usize, listener: AgentPose, length: usize) -> Result<BinauralRIR> {
    let room = scene.spec.room();
    let l = Listener { position: scene.acoustic_position(listener.node), heading: listener.heading.radians() };
    image_source_rir(&room, scene.acoustic_position(source_node), &l, length)
}

/// Hull of both agents' positions now and one step earlier.
pub fn footprint(scene: &NavScene, now: [AgentPose; 2], prev: [AgentPose; 2]) -> HullStats {
    hull_stats(scene.ground(now[0].node), scene.ground(now[1].node), scene.ground(prev[0].node), scene.ground(prev[1].node))
}

/// The emit/receive exchange at one step.
#[derive(Debug, Clone)]
pub struct Measurement {
    /// Agent 0 emits, agent 1 receives.
    pub forward: PredictionInput,
    pub forward_truth: BinauralRIR,
    /// Predicted forward response, `2L` samples in `[-1, 1]`.
    pub forward_pred: Vec<f64>,
    /// Generator input `f_r ⊕ f_m` of the forward query.
    pub latent: Vec<f64>,
    /// `Δ` of the forward prediction.
    pub delta: f64,
    /// Roles swapped: agent 1 emits, agent 0 receives.
    pub reverse: PredictionInput,
    pub reverse_truth: BinauralRIR,
}

/// What one call to [`Episode::step`] produced.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: RewardBreakdown,
    pub levels: StepLevels,
    pub measurement: Measurement,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Episode<'s> {
    pub scene: &'s NavScene,
    pub scene_index: usize,
    pub agents: [Agent; 2],
    pub prev_poses: [AgentPose; 2],
    pub t: usize,
    pub coverage: CoverageTracker,
    pub rewards: RewardTracker,
    pub bank: MemoryBank,
    pub levels: StepLevels,
    /// Breakdown of the latest step (all-zero differences at step 0).
    pub last_reward: RewardBreakdown,
    /// Noise replacing one observation modality, if any.
    pub intervention: Option<Intervention>,
}

/// Uniform node and heading for each agent (starts may coincide).
pub fn random_start<R: Rng + ?Sized>(scene: &NavScene, rng: &mut R) -> [AgentPose; 2] {
    let mut pose = || AgentPose {
        node: rng.random_range(0..scene.node_count()),
        heading: Heading::from_quarter_turns(rng.random_range(0..4)),
    };
    [pose(), pose()]
}

impl<'s> Episode<'s> {
    /// Starts an episode and takes the step-0 measurement (zero reward).
    pub fn start(
        ctx: EnvContext<'_>,
        scene: &'s NavScene,
        scene_index: usize,
        start: [AgentPose; 2],
        predictor: PredictSource<'_>,
        coefs: RewardCoefs,
    ) -> Result<(Self, Measurement)> {
        Self::start_with(ctx, scene, scene_index, start, predictor, coefs, None)
    }

    /// [`Episode::start`] with an observation intervention active from step 0.
    pub fn start_with(
        ctx: EnvContext<'_>,
        scene: &'s NavScene,
        scene_index: usize,
        start: [AgentPose; 2],
        predictor: PredictSource<'_>,
        coefs: RewardCoefs,
        intervention: Option<Intervention>,
    ) -> Result<(Self, Measurement)> {
        let mut ep = Episode {
            scene,
            scene_index,
            agents: [Agent::new(start[0]), Agent::new(start[1])],
            prev_poses: start,
            t: 0,
            coverage: CoverageTracker::new(scene.node_count()),
            rewards: RewardTracker::new(coefs),
            bank: MemoryBank::new(ctx.cfg.kappa, ctx.cfg.policy().patch_len()),
            levels: StepLevels::default(),
            last_reward: RewardBreakdown::default(),
            intervention,
        };
        let (levels, m) = ep.measure(ctx, predictor)?;
        ep.last_reward = ep.rewards.observe(levels);
        ep.levels = levels;
        Ok((ep, m))
    }

    pub fn poses(&self) -> [AgentPose; 2] {
        [self.agents[0].pose, self.agents[1].pose]
    }

    pub fn observation(&self, ctx: EnvContext<'_>, agent: usize) -> Observation {
        let pose = self.agents[agent].pose;
        let cfg = ctx.cfg;
        let vision = if cfg.blind {
            vec![0.0; cfg.policy().patch_len()]
        } else {
            egocentric_patch(self.scene, pose, cfg.patch_radius, cfg.fov90).cells
        };
        Observation { vision, heading: pose.heading, step: self.t, horizon: cfg.max_steps, position: self.scene.position(pose.node) }
    }

    pub fn features(&self, ctx: EnvContext<'_>) -> [ObsFeatures; 2] {
        [0, 1].map(|j| {
            let mut f = self.observation(ctx, j).features(ctx.cfg.raw_step);
            if let Some(iv) = &self.intervention {
                iv.apply(&mut f, self.t, j);
            }
            f
        })
    }

    fn measure(&mut self, ctx: EnvContext<'_>, predictor: PredictSource<'_>) -> Result<(StepLevels, Measurement)> {
        let poses = self.poses();
        let zeta = self.coverage.update(&poses);
        let hull = footprint(self.scene, poses, self.prev_poses);
        let feats = self.features(ctx);
        let forward = PredictionInput::observe(&mut self.bank, feats);
        let reverse = forward.swapped();
        let len = ctx.cfg.rir_length;
        let forward_truth = ground_truth(self.scene, poses[0].node, poses[1], len)?;
        let reverse_truth = ground_truth(self.scene, poses[1].node, poses[0], len)?;
        let (forward_pred, latent) = predictor.predict(&forward)?;
        let target = RirTarget::new(&forward_truth, ctx.stft, true)?;
        let (loss, _) = target.loss_with_grad(&forward_pred, &PredictionLossWeights::default(), ctx.stft, false, true)?;
        let delta = loss.stft;
        let m = Measurement { forward, forward_truth, forward_pred, latent, delta, reverse, reverse_truth };
        Ok((StepLevels::new(delta, zeta, hull), m))
    }

    pub fn is_done(&self, max_steps: usize) -> bool {
        self.t >= max_steps || (self.agents[0].stopped && self.agents[1].stopped)
    }

    /// Applies both actions (ignored for stopped agents), advances time and
    /// measures at the new poses.
    pub fn step(&mut self, ctx: EnvContext<'_>, actions: [Action; 2], predictor: PredictSource<'_>) -> Result<StepOutcome> {
        self.prev_poses = self.poses();
        for (agent, action) in self.agents.iter_mut().zip(actions) {
            agent.act(self.scene, action);
        }
        self.t += 1;
        let (levels, measurement) = self.measure(ctx, predictor)?;
        let reward = self.rewards.observe(levels);
        self.levels = levels;
        self.last_reward = reward.clone();
        Ok(StepOutcome { reward, levels, measurement, done: self.is_done(ctx.cfg.max_steps) })
    }
}
