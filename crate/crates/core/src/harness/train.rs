//! Training loop, generator pretraining and model persistence.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{adam_update, clip_global_norm, Checkpoint, OptimConfig, ParamStore, Tensor2};
use crate::policy::{ppo_motion_loss, MotionLoss, PolicyNet, PpoConfig, TrajectoryBuffer};
use crate::predictor::{predictor_loss_backward, PredictionInput, Predictor, RirLoss, RirTarget};
use crate::rewards::{AssignmentHead, AssignmentMode};
use crate::scene::NavScene;
use crate::spectral::Stft;

use super::config::RunConfig;
use super::env::{EnvContext, PredictSource};
use super::rollout::{Models, PredictionRecord, Rollout, Worker};

/// Independent RNG stream for `(seed, purpose, index)`.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    rng
}

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_WORKER: u64 = 2;
pub(crate) const STREAM_PROBE: u64 = 3;
pub(crate) const STREAM_EVAL: u64 = 4;
pub(crate) const STREAM_ANALYSIS: u64 = 5;

/// All trainable parameters of a run: the two policies (θ), the predictor
/// (part of Ω) and, in the learned-assignment mode, the assignment head.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub policy_store: ParamStore,
    pub policy: PolicyNet,
    pub predictor_store: ParamStore,
    pub predictor: Predictor,
    pub assign_store: ParamStore,
    pub assign: Option<AssignmentHead>,
}

impl TrainedModels {
    pub fn init(cfg: &RunConfig) -> Result<Self> {
        let mut rng = stream_rng(cfg.seed, STREAM_INIT, 0);
        let mut policy_store = ParamStore::new();
        let policy = PolicyNet::new(&mut policy_store, &cfg.policy(), &mut rng)?;
        let mut predictor_store = ParamStore::new();
        let predictor = Predictor::new(&mut predictor_store, cfg.predictor(), &mut rng)?;
        let mut assign_store = ParamStore::new();
        let assign = if cfg.assignment.is_learned() {
            Some(AssignmentHead::new(&mut assign_store, "assign", cfg.hidden, &mut rng)?)
        } else {
            None
        };
        Ok(TrainedModels { policy_store, policy, predictor_store, predictor, assign_store, assign })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_stores(&[&self.policy_store, &self.predictor_store, &self.assign_store])
    }

    /// Shapes come from `cfg`; every block must be present in `ckpt`.
    pub fn from_checkpoint(cfg: &RunConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut m = TrainedModels::init(cfg)?;
        ckpt.load_into(&mut m.policy_store)?;
        ckpt.load_into(&mut m.predictor_store)?;
        ckpt.load_into(&mut m.assign_store)?;
        Ok(m)
    }

    /// Loads only the predictor blocks (e.g. from a pretraining checkpoint).
    pub fn load_predictor(&mut self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.load_into(&mut self.predictor_store)
    }

    pub fn predict_source(&self) -> PredictSource<'_> {
        PredictSource::Generator(&self.predictor, &self.predictor_store)
    }

    fn rollout_models(&self, with_policy: bool) -> Models<'_> {
        Models {
            policy: with_policy.then_some((&self.policy, &self.policy_store)),
            predictor: self.predict_source(),
            assign: self.assign.as_ref().map(|h| (h, &self.assign_store)),
        }
    }
}

/// Per-update log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: usize,
    pub learning_rate: f64,
    pub clip: f64,
    pub motion: MotionLoss,
    /// `L^m` (weighted over agents).
    pub l_m: f64,
    pub l_xi: RirLoss,
    pub l_sigma: f64,
    /// `w_m·L^m + w_ξ·L^ξ + w_σ·L^σ`. Policy and assignment terms are from
    /// the first epoch; `L^ξ` is the mean over all prediction records.
    pub total: f64,
    pub w_m: f64,
    pub w_xi: f64,
    pub w_sigma: f64,
    pub steps: usize,
    pub episodes_finished: usize,
    /// Moving average of finished-episode returns (window from the config).
    pub reward_window_mean: Option<f64>,
    pub policy_grad_norm: f64,
    pub predictor_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub models: TrainedModels,
    pub logs: Vec<UpdateLog>,
}

fn collect_all(workers: &mut [Worker<'_>], ctx: EnvContext<'_>, models: &Models<'_>, n_steps: usize) -> Result<Vec<Rollout>> {
    if workers.len() == 1 {
        return Ok(vec![workers[0].collect(ctx, models, n_steps)?]);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = workers.iter_mut().map(|w| s.spawn(move || w.collect(ctx, models, n_steps))).collect();
        handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
    })
}

fn optimize(store: &mut ParamStore, cfg: &OptimConfig) -> Result<f64> {
    let norm = clip_global_norm(store, cfg.max_grad_norm);
    adam_update(store, cfg)?;
    Ok(norm)
}

fn chunk<T>(items: &[T], parts: usize, k: usize) -> &[T] {
    let n = items.len();
    &items[k * n / parts..(k + 1) * n / parts]
}

fn split_buffer(buf: &TrajectoryBuffer, parts: usize, k: usize) -> TrajectoryBuffer {
    let n = buf.steps.len();
    let (a, b) = (k * n / parts, (k + 1) * n / parts);
    TrajectoryBuffer {
        steps: buf.steps[a..b].to_vec(),
        bootstrap_value: buf.bootstrap_value,
        advantages: buf.advantages[a..b].to_vec(),
        returns: buf.returns[a..b].to_vec(),
    }
}

fn write_json_line<T: Serialize>(path: &Path, value: &T, append: bool) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(append)
        .write(true)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::file(path, e))?;
    serde_json::to_writer(&mut f, value)?;
    writeln!(f).map_err(|e| Error::file(path, e))?;
    Ok(())
}

/// One optimization pass over a collected batch; returns the log entries
/// of the first epoch.
struct Batch {
    buffers: [TrajectoryBuffer; 2],
    inputs: Vec<PredictionInput>,
    targets: Vec<RirTarget>,
    assign_rows: Vec<Vec<f64>>,
    assign_rewards: Vec<f64>,
}

fn build_batch(rollouts: Vec<Rollout>, cfg: &RunConfig, stft: &Stft) -> Result<(Batch, Vec<f64>, usize)> {
    let (tau, mode) = cfg.advantage();
    let mut parts: [Vec<TrajectoryBuffer>; 2] = [Vec::new(), Vec::new()];
    let mut records: Vec<PredictionRecord> = Vec::new();
    let mut assign_rows = Vec::new();
    let mut assign_rewards = Vec::new();
    let mut returns = Vec::new();
    let mut steps = 0;
    for mut r in rollouts {
        for (j, mut buf) in std::mem::take(&mut r.buffers).into_iter().enumerate() {
            buf.compute_advantages(cfg.gamma, tau, mode);
            parts[j].push(buf);
        }
        records.extend(r.records);
        assign_rows.extend(r.assign_rows);
        assign_rewards.extend(r.assign_rewards);
        returns.extend(r.episode_returns);
        steps += r.steps;
    }
    let [p0, p1] = parts;
    let want_spectra = cfg.w_mse < 1.0;
    let targets = records.iter().map(|r| RirTarget::new(&r.truth, stft, want_spectra)).collect::<Result<Vec<_>>>()?;
    let inputs = records.into_iter().map(|r| r.input).collect();
    Ok((
        Batch {
            buffers: [TrajectoryBuffer::concat(p0), TrajectoryBuffer::concat(p1)],
            inputs,
            targets,
            assign_rows,
            assign_rewards,
        },
        returns,
        steps,
    ))
}

/// Trains from `init` (or fresh parameters) on `scenes`.
///
/// Each update collects `num steps` per worker, computes advantages, and
/// runs `ppo epoch` passes; every pass takes one step on the policy loss
/// `w_m·L^m`, the prediction loss `w_ξ·L^ξ` and, in the learned mode, the
/// assignment loss `w_σ·L^σ`, each parameter group with its own clipping
/// and Adam state.
pub fn train(
    cfg: &RunConfig,
    scenes: &[NavScene],
    init: Option<TrainedModels>,
    out_dir: Option<&Path>,
    on_update: &mut dyn FnMut(&UpdateLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::config("no training scenes"));
    }
    let stft = Stft::new(cfg.stft)?;
    let ctx = EnvContext { cfg, stft: &stft };
    let mut models = match init {
        Some(m) => m,
        None => TrainedModels::init(cfg)?,
    };
    let mut workers: Vec<Worker<'_>> =
        (0..cfg.workers).map(|w| Worker::new(stream_rng(cfg.seed, STREAM_WORKER, w as u64), scenes, cfg.hidden)).collect();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        std::fs::write(dir.join("config.txt"), cfg.to_text()).map_err(|e| Error::file(dir.join("config.txt"), e))?;
        std::fs::write(dir.join("train_log.jsonl"), "").map_err(|e| Error::file(dir.join("train_log.jsonl"), e))?;
    }
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.reward_window);
    let mut logs = Vec::with_capacity(cfg.updates);
    let loss_weights = cfg.loss_weights();
    for update in 0..cfg.updates {
        let frac = 1.0 - update as f64 / cfg.updates as f64;
        let lr = if cfg.lr_decay { cfg.learning_rate * frac } else { cfg.learning_rate };
        let clip = if cfg.clip_decay { cfg.clip * frac } else { cfg.clip };
        let optim = OptimConfig { learning_rate: lr, ..cfg.optim() };
        let ppo = PpoConfig { clip, ..cfg.ppo() };

        let rollouts = {
            let m = models.rollout_models(true);
            collect_all(&mut workers, ctx, &m, cfg.num_steps)?
        };
        let (batch, returns, steps) = build_batch(rollouts, cfg, &stft)?;
        for r in &returns {
            if window.len() == cfg.reward_window {
                window.pop_front();
            }
            window.push_back(*r);
        }

        let mut first: Option<(MotionLoss, f64, f64, f64)> = None;
        let mut xi_all = RirLoss::default();
        for epoch in 0..cfg.ppo_epochs {
            let mut motion_acc = MotionLoss::default();
            let mut sigma_acc = 0.0;
            let (mut pn, mut qn) = (0.0, 0.0);
            let parts = cfg.mini_batches;
            for k in 0..parts {
                let b0 = split_buffer(&batch.buffers[0], parts, k);
                let b1 = split_buffer(&batch.buffers[1], parts, k);
                models.policy_store.zero_grads();
                let motion = ppo_motion_loss(&mut models.policy_store, &models.policy, [&b0, &b1], &ppo, cfg.w_m)?;
                pn += optimize(&mut models.policy_store, &optim)? / parts as f64;
                motion_acc.total += motion.total / parts as f64;
                for j in 0..2 {
                    let a = &mut motion_acc.agents[j];
                    let m = &motion.agents[j];
                    a.value += m.value / parts as f64;
                    a.policy += m.policy / parts as f64;
                    a.entropy += m.entropy / parts as f64;
                    a.total += m.total / parts as f64;
                    a.clip_fraction += m.clip_fraction / parts as f64;
                }

                if cfg.w_xi > 0.0 && !batch.inputs.is_empty() {
                    // Each epoch and mini-batch sees a disjoint slice of the
                    // prediction records: one predictor pass per update.
                    let slices = cfg.ppo_epochs * parts;
                    let c = epoch * parts + k;
                    let inputs: Vec<&PredictionInput> = batch.inputs.iter().skip(c).step_by(slices).collect();
                    let targets: Vec<&RirTarget> = batch.targets.iter().skip(c).step_by(slices).collect();
                    if !inputs.is_empty() {
                        models.predictor_store.zero_grads();
                        let l = predictor_loss_backward(
                            &models.predictor,
                            &mut models.predictor_store,
                            &inputs,
                            &targets,
                            &loss_weights,
                            &stft,
                            cfg.w_xi,
                        )?;
                        qn += optimize(&mut models.predictor_store, &optim)? / parts as f64;
                        let share = inputs.len() as f64 / batch.inputs.len() as f64;
                        xi_all.total += l.total * share;
                        xi_all.stft += l.stft * share;
                        xi_all.mse += l.mse * share;
                    }
                }

                if let (AssignmentMode::Learned(rho), Some(head)) = (cfg.assignment, models.assign.as_ref()) {
                    let rows = chunk(&batch.assign_rows, parts, k);
                    if cfg.w_sigma > 0.0 && !rows.is_empty() {
                        let input = Tensor2::from_rows(rows)?;
                        let rewards = chunk(&batch.assign_rewards, parts, k);
                        models.assign_store.zero_grads();
                        sigma_acc += head.sigma_loss_backward(&mut models.assign_store, &input, rewards, rho, cfg.w_sigma)? / parts as f64;
                        optimize(&mut models.assign_store, &optim)?;
                    }
                }
            }
            if first.is_none() {
                first = Some((motion_acc, sigma_acc, pn, qn));
            }
        }
        let (motion, l_sigma, pn, qn) = first.expect("at least one epoch");
        let l_xi = xi_all;
        let l_m = motion.total;
        let total = cfg.w_m * l_m + cfg.w_xi * l_xi.total + cfg.w_sigma * l_sigma;
        let log = UpdateLog {
            update,
            learning_rate: lr,
            clip,
            motion,
            l_m,
            l_xi,
            l_sigma,
            total,
            w_m: cfg.w_m,
            w_xi: cfg.w_xi,
            w_sigma: cfg.w_sigma,
            steps,
            episodes_finished: returns.len(),
            reward_window_mean: (!window.is_empty()).then(|| window.iter().sum::<f64>() / window.len() as f64),
            policy_grad_norm: pn,
            predictor_grad_norm: qn,
        };
        if !total.is_finite() {
            if let Some(dir) = out_dir {
                let path = dir.join(format!("diagnostic_update{update}.json"));
                let dump = serde_json::json!({
                    "log": &log,
                    "rewards": [
                        batch.buffers[0].steps.iter().map(|s| s.reward).collect::<Vec<_>>(),
                        batch.buffers[1].steps.iter().map(|s| s.reward).collect::<Vec<_>>(),
                    ],
                    "advantages": [&batch.buffers[0].advantages, &batch.buffers[1].advantages],
                });
                std::fs::write(&path, serde_json::to_string_pretty(&dump)?).map_err(|e| Error::file(&path, e))?;
            }
            return Err(Error::Training {
                block: format!("update {update}"),
                msg: format!("non-finite loss: L^m = {l_m}, L^xi = {}, L^sigma = {l_sigma}", l_xi.total),
            });
        }
        if let Some(dir) = out_dir {
            write_json_line(&dir.join("train_log.jsonl"), &log, true)?;
            if (update + 1) % cfg.checkpoint_interval == 0 && update + 1 < cfg.updates {
                models.checkpoint().save(&dir.join(format!("checkpoint_{:06}.bin", update + 1)))?;
            }
        }
        on_update(&log);
        logs.push(log);
    }
    if let Some(dir) = out_dir {
        models.checkpoint().save(&dir.join("checkpoint.bin"))?;
    }
    Ok(TrainOutcome { models, logs })
}

/// Fixed set of prediction records for measuring `L^ξ`.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub inputs: Vec<PredictionInput>,
    pub targets: Vec<RirTarget>,
}

impl ProbeSet {
    /// Random-walk records on `scenes`, `steps` environment steps.
    pub fn collect(cfg: &RunConfig, scenes: &[NavScene], models: &TrainedModels, steps: usize) -> Result<Self> {
        let stft = Stft::new(cfg.stft)?;
        let ctx = EnvContext { cfg, stft: &stft };
        let mut w = Worker::new(stream_rng(cfg.seed, STREAM_PROBE, 0), scenes, cfg.hidden);
        let r = w.collect(ctx, &models.rollout_models(false), steps)?;
        let want_spectra = cfg.w_mse < 1.0;
        let targets = r.records.iter().map(|x| RirTarget::new(&x.truth, &stft, want_spectra)).collect::<Result<Vec<_>>>()?;
        Ok(ProbeSet { inputs: r.records.into_iter().map(|x| x.input).collect(), targets })
    }

    pub fn loss(&self, cfg: &RunConfig, models: &TrainedModels) -> Result<RirLoss> {
        let stft = Stft::new(cfg.stft)?;
        let mut store = models.predictor_store.clone();
        let inputs: Vec<&PredictionInput> = self.inputs.iter().collect();
        let targets: Vec<&RirTarget> = self.targets.iter().collect();
        predictor_loss_backward(&models.predictor, &mut store, &inputs, &targets, &cfg.loss_weights(), &stft, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub models: TrainedModels,
    /// `L^ξ` of each update's batch.
    pub losses: Vec<f64>,
}

/// Random-policy rollouts; only the predictor is updated, on `L^ξ` alone.
pub fn pretrain_generator(
    cfg: &RunConfig,
    scenes: &[NavScene],
    init: Option<TrainedModels>,
    updates: usize,
    on_update: &mut dyn FnMut(usize, f64),
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::config("no training scenes"));
    }
    let stft = Stft::new(cfg.stft)?;
    let ctx = EnvContext { cfg, stft: &stft };
    let mut models = match init {
        Some(m) => m,
        None => TrainedModels::init(cfg)?,
    };
    let mut workers: Vec<Worker<'_>> =
        (0..cfg.workers).map(|w| Worker::new(stream_rng(cfg.seed, STREAM_WORKER, w as u64), scenes, cfg.hidden)).collect();
    let optim = cfg.optim();
    let weights = cfg.loss_weights();
    let mut losses = Vec::with_capacity(updates);
    for update in 0..updates {
        let rollouts = {
            let m = models.rollout_models(false);
            collect_all(&mut workers, ctx, &m, cfg.num_steps)?
        };
        let (batch, _, _) = build_batch(rollouts, cfg, &stft)?;
        let inputs: Vec<&PredictionInput> = batch.inputs.iter().collect();
        let targets: Vec<&RirTarget> = batch.targets.iter().collect();
        models.predictor_store.zero_grads();
        let l = predictor_loss_backward(&models.predictor, &mut models.predictor_store, &inputs, &targets, &weights, &stft, 1.0)?;
        if !l.total.is_finite() {
            return Err(Error::Training { block: format!("pretrain update {update}"), msg: format!("non-finite L^xi = {}", l.total) });
        }
        optimize(&mut models.predictor_store, &optim)?;
        on_update(update, l.total);
        losses.push(l.total);
    }
    Ok(PretrainOutcome { models, losses })
}
