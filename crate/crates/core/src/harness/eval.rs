//! Seeded evaluation of the trained model and the baselines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::BinauralRIR;
use crate::baselines::LatentRecord;
use crate::error::{Error, Result};
use crate::metrics::{coverage_rate, pes, rte, sisdr_rir, wcr, EpisodeMetrics, MetricsReport};
use crate::rewards::{assign_rewards, AssignmentMode};
use crate::scene::{Action, NavScene};
use crate::spectral::Stft;

use super::analysis::Intervention;
use super::config::RunConfig;
use super::env::{random_start, EnvContext, Episode, Measurement, NnBank, PredictSource};
use super::rollout::{Actor, Driver};
use super::trace::{EpisodeTrace, TraceMeta, TraceStep};
use super::train::{stream_rng, TrainedModels, STREAM_EVAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// The learned policies with the generator.
    Trained,
    Random,
    Occupancy,
    Curiosity,
    /// Random motion; responses looked up from the training bank.
    NearestNeighbor,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Trained => "trained",
            ModelKind::Random => "random",
            ModelKind::Occupancy => "occupancy",
            ModelKind::Curiosity => "curiosity",
            ModelKind::NearestNeighbor => "nn",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "trained" => ModelKind::Trained,
            "random" => ModelKind::Random,
            "occupancy" => ModelKind::Occupancy,
            "curiosity" => ModelKind::Curiosity,
            "nn" | "nearest-neighbor" => ModelKind::NearestNeighbor,
            other => return Err(Error::config(format!("unknown model `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Take the most probable action instead of sampling.
    pub greedy: bool,
    pub si_projection: bool,
    /// Score RTE and SiSDR (both need per-step RT60 fits).
    pub waveform_metrics: bool,
    /// Observation noise; its seed is mixed with the episode key.
    pub intervention: Option<Intervention>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { greedy: false, si_projection: false, waveform_metrics: true, intervention: None }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub traces: Vec<EpisodeTrace>,
}

/// Start-pose and action RNGs of one evaluation episode. Start poses do not
/// depend on the model, so every model sees the same starts.
pub fn episode_rngs(seed: u64, scene: usize, episode: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let key = ((scene as u64) << 24 | episode as u64) << 1;
    (stream_rng(seed, STREAM_EVAL, key), stream_rng(seed, STREAM_EVAL, key | 1))
}

/// Per-step waveform scores accumulated over an episode.
#[derive(Debug, Default)]
struct WaveScores {
    rte: Vec<f64>,
    sisdr: Vec<f64>,
    skipped: usize,
}

impl WaveScores {
    fn add(&mut self, m: &Measurement, si_projection: bool) -> Result<()> {
        let pred = BinauralRIR::from_f64(m.forward_truth.sample_rate, &m.forward_pred)?;
        match rte(&m.forward_truth, &pred) {
            Ok(v) => self.rte.push(v),
            Err(Error::Metric(_)) => self.skipped += 1,
            Err(e) => return Err(e),
        }
        self.sisdr.push(sisdr_rir(&m.forward_truth, &pred, si_projection)?);
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs one episode to completion and returns its trace and metrics.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    ctx: EnvContext<'_>,
    scene: &NavScene,
    scene_index: usize,
    driver: Driver<'_>,
    predictor: PredictSource<'_>,
    models: &TrainedModels,
    meta: TraceMeta,
    start_rng: &mut ChaCha8Rng,
    action_rng: &mut ChaCha8Rng,
    opts: EvalOptions,
) -> Result<(EpisodeTrace, EpisodeMetrics)> {
    let cfg = ctx.cfg;
    let start = random_start(scene, start_rng);
    let intervention = opts.intervention.map(|iv| Intervention {
        seed: iv.seed ^ ((meta.seed << 40) ^ ((scene_index as u64) << 20) ^ meta.episode as u64),
        ..iv
    });
    let (mut ep, m0) = Episode::start_with(ctx, scene, scene_index, start, predictor, cfg.reward, intervention)?;
    let mut actor = Actor::new(cfg.hidden);
    let mut scores = WaveScores::default();
    let mut pe = vec![m0.delta];
    if opts.waveform_metrics {
        scores.add(&m0, opts.si_projection)?;
    }
    let l0 = ep.levels;
    let mut steps = vec![TraceStep {
        t: 0,
        poses: ep.poses(),
        actions: None,
        reward: ep.last_reward.clone(),
        shares: (0.0, 0.0),
        pe: l0.delta,
        zeta: l0.coverage,
        psi: l0.perimeter,
        phi: l0.area,
    }];
    while !ep.is_done(cfg.max_steps) {
        let (mut actions, _) = actor.act(ctx, driver, &ep, action_rng)?;
        for (a, agent) in actions.iter_mut().zip(&ep.agents) {
            if agent.stopped {
                *a = Action::Stop;
            }
        }
        let out = ep.step(ctx, actions, predictor)?;
        let r = out.reward.total;
        let learned = match (cfg.assignment, models.assign.as_ref()) {
            (AssignmentMode::Learned(_), Some(head)) => Some(head.weights(&models.assign_store, &actor.hidden[0], &actor.hidden[1], r)?),
            _ => None,
        };
        let shares = assign_rewards(cfg.assignment, r, learned)?;
        pe.push(out.measurement.delta);
        if opts.waveform_metrics {
            scores.add(&out.measurement, opts.si_projection)?;
        }
        steps.push(TraceStep {
            t: ep.t,
            poses: ep.poses(),
            actions: Some(actions),
            reward: out.reward,
            shares: (shares.r_omega, shares.r_nu),
            pe: out.levels.delta,
            zeta: out.levels.coverage,
            psi: out.levels.perimeter,
            phi: out.levels.area,
        });
    }
    let trace = EpisodeTrace { meta, steps };
    let cr = coverage_rate(trace.visited_nodes(), scene.node_count());
    let pe_mean = mean(&pe);
    let metrics = EpisodeMetrics {
        model: trace.meta.model.clone(),
        scene: scene_index,
        seed: trace.meta.seed,
        episode: trace.meta.episode,
        cr,
        pe: pe_mean,
        pes: pes(pe_mean),
        wcr: wcr(cr, pe_mean, cfg.lambda),
        rte_ms: (!scores.rte.is_empty()).then(|| mean(&scores.rte)),
        sisdr_db: if scores.sisdr.is_empty() { f64::NAN } else { mean(&scores.sisdr) },
        rte_skipped: scores.skipped,
    };
    Ok((trace, metrics))
}

/// Evaluates `kind` on `scenes` for every seed in `cfg.eval_seeds` and
/// `cfg.episodes` episodes per scene. Rows are ordered seed, scene, episode.
pub fn evaluate(
    cfg: &RunConfig,
    scenes: &[NavScene],
    models: &TrainedModels,
    kind: ModelKind,
    nn_bank: Option<&NnBank>,
    opts: EvalOptions,
) -> Result<EvalOutcome> {
    let stft = Stft::new(cfg.stft)?;
    let ctx = EnvContext { cfg, stft: &stft };
    let driver = match kind {
        ModelKind::Trained => Driver::Policy { net: &models.policy, store: &models.policy_store, greedy: opts.greedy },
        ModelKind::Random | ModelKind::NearestNeighbor => Driver::Random,
        ModelKind::Occupancy => Driver::Occupancy,
        ModelKind::Curiosity => Driver::Curiosity,
    };
    let predictor = match kind {
        ModelKind::NearestNeighbor => {
            let bank = nn_bank.ok_or_else(|| Error::config("nearest-neighbor evaluation needs a latent bank"))?;
            PredictSource::Nearest(&models.predictor, &models.predictor_store, bank)
        }
        _ => models.predict_source(),
    };
    let mut report = MetricsReport::new(cfg.lambda);
    let mut traces = Vec::new();
    for &seed in &cfg.eval_seeds {
        for (si, scene) in scenes.iter().enumerate() {
            for e in 0..cfg.episodes {
                let (mut start_rng, mut action_rng) = episode_rngs(seed, si, e);
                let meta = TraceMeta {
                    model: kind.tag().to_string(),
                    scene_index: si,
                    scene: scene.spec.clone(),
                    seed,
                    episode: e,
                    coefs: cfg.reward,
                };
                let (trace, row) =
                    run_episode(ctx, scene, si, driver, predictor, models, meta, &mut start_rng, &mut action_rng, opts)?;
                report.push(row);
                traces.push(trace);
            }
        }
    }
    Ok(EvalOutcome { report, traces })
}

/// Latent bank for the nearest-neighbor baseline: random-walk episodes on
/// the training scenes, storing each forward query's latent and response.
pub fn build_nn_bank(cfg: &RunConfig, scenes: &[NavScene], models: &TrainedModels, episodes_per_scene: usize) -> Result<NnBank> {
    let stft = Stft::new(cfg.stft)?;
    let ctx = EnvContext { cfg, stft: &stft };
    let source = models.predict_source();
    let mut bank = NnBank::default();
    let push = |bank: &mut NnBank, ep: &Episode<'_>, m: Measurement| {
        let poses = ep.poses();
        bank.records.push(LatentRecord {
            scene: ep.scene_index,
            latent: m.latent,
            listener_heading_deg: poses[1].heading.degrees(),
            listener_node: poses[1].node,
            source_node: poses[0].node,
            rir_index: bank.responses.len(),
        });
        bank.responses.push(m.forward_truth);
    };
    for (si, scene) in scenes.iter().enumerate() {
        for e in 0..episodes_per_scene {
            let mut rng = stream_rng(cfg.seed, super::train::STREAM_ANALYSIS + 1, ((si as u64) << 24) | e as u64);
            let start = random_start(scene, &mut rng);
            let (mut ep, m) = Episode::start(ctx, scene, si, start, source, cfg.reward)?;
            push(&mut bank, &ep, m);
            while !ep.is_done(cfg.max_steps) {
                let a = [0, 1].map(|_| Action::MOVEMENT[rng.random_range(0..3)]);
                let out = ep.step(ctx, a, source)?;
                push(&mut bank, &ep, out.measurement);
            }
        }
    }
    Ok(bank)
}
