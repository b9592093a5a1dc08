//! Run configuration as flat `key = value` text. Keys follow the names of
//! the reference hyperparameter table where one exists.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::OptimConfig;
use crate::policy::{AdvantageMode, EncoderWidths, PolicyConfig, PpoConfig};
use crate::predictor::{PredictionLossWeights, PredictorConfig};
use crate::rewards::{AssignmentMode, RewardCoefs};
use crate::scene::{build_scene, NavScene, SceneSpec};
use crate::spectral::{StftConfig, WindowKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub updates: usize,
    /// Evaluation episodes per scene and seed.
    pub episodes: usize,
    pub max_steps: usize,
    /// Steps each worker collects per update.
    pub num_steps: usize,
    pub lr_decay: bool,
    pub clip_decay: bool,
    pub sample_rate: u32,
    pub rir_length: usize,
    pub clip: f64,
    pub ppo_epochs: usize,
    pub mini_batches: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub use_gae: bool,
    pub advantage_mode: AdvantageMode,
    pub reward_window: usize,
    pub stft: StftConfig,
    pub workers: usize,
    pub w_mse: f64,
    pub w_m_agents: [f64; 2],
    pub w_m: f64,
    pub w_xi: f64,
    pub w_sigma: f64,
    pub reward: RewardCoefs,
    pub gamma: f64,
    pub tau: f64,
    pub kappa: usize,
    pub lambda: f64,
    pub hidden: usize,
    pub assignment: AssignmentMode,
    pub seed: u64,
    pub scene_width: f64,
    pub scene_depth: f64,
    pub scene_resolution: f64,
    pub max_order: u32,
    pub train_scenes: Vec<u64>,
    pub val_scenes: Vec<u64>,
    pub test_scenes: Vec<u64>,
    pub eval_seeds: Vec<u64>,
    pub patch_radius: usize,
    pub fov90: bool,
    pub raw_step: bool,
    pub blind: bool,
    pub encoder: EncoderWidths,
    pub memory_width: usize,
    pub generator_hidden: usize,
    pub checkpoint_interval: usize,
}

impl RunConfig {
    /// Single-desktop defaults: 8 x 8 m rooms at 0.5 m, 64-step episodes.
    pub fn desk() -> Self {
        RunConfig {
            updates: 2000,
            episodes: 1,
            max_steps: 64,
            num_steps: 64,
            lr_decay: false,
            clip_decay: false,
            sample_rate: 16_000,
            rir_length: 2000,
            clip: 0.1,
            ppo_epochs: 4,
            mini_batches: 1,
            value_coef: 0.5,
            entropy_coef: 0.02,
            learning_rate: 2e-4,
            max_grad_norm: 0.5,
            use_gae: true,
            advantage_mode: AdvantageMode::Standard,
            reward_window: 50,
            stft: StftConfig::default(),
            workers: 4,
            w_mse: 1.0,
            w_m_agents: [0.5, 0.5],
            w_m: 0.5,
            w_xi: 0.5,
            w_sigma: 0.0,
            reward: RewardCoefs::default(),
            gamma: 0.99,
            tau: 0.95,
            kappa: 2,
            lambda: 0.1,
            hidden: 64,
            assignment: AssignmentMode::FullShared,
            seed: 0,
            scene_width: 8.0,
            scene_depth: 8.0,
            scene_resolution: 0.5,
            max_order: 8,
            train_scenes: (0..16).collect(),
            val_scenes: (100..104).collect(),
            test_scenes: (200..208).collect(),
            eval_seeds: (0..5).collect(),
            patch_radius: 3,
            fov90: false,
            raw_step: false,
            blind: false,
            encoder: EncoderWidths { vision: 32, azimuth: 8, position: 16 },
            memory_width: 32,
            generator_hidden: 64,
            checkpoint_interval: 500,
        }
    }

    /// Reference-scale values (large rooms, long responses, wide layers).
    pub fn paper() -> Self {
        RunConfig {
            updates: 40_000,
            max_steps: 250,
            num_steps: 150,
            rir_length: 16_000,
            workers: 5,
            kappa: 1,
            hidden: 512,
            encoder: EncoderWidths { vision: 256, azimuth: 32, position: 64 },
            memory_width: 256,
            generator_hidden: 512,
            scene_width: 12.0,
            scene_depth: 10.0,
            ..RunConfig::desk()
        }
    }

    /// Reward-assignment variant: the three loss weights become 1/3.
    pub fn with_learned_assignment(mut self, rho: f64) -> Self {
        self.assignment = AssignmentMode::Learned(rho);
        self.w_m = 1.0 / 3.0;
        self.w_xi = 1.0 / 3.0;
        self.w_sigma = 1.0 / 3.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("number of updates", self.updates),
            ("number of episodes", self.episodes),
            ("max steps", self.max_steps),
            ("num steps", self.num_steps),
            ("rir length", self.rir_length),
            ("ppo epoch", self.ppo_epochs),
            ("num mini batch", self.mini_batches),
            ("number of processes", self.workers),
            ("hidden size", self.hidden),
            ("reward window size", self.reward_window),
            ("generator hidden", self.generator_hidden),
            ("checkpoint interval", self.checkpoint_interval),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("`{k}` must be positive")));
            }
        }
        if self.mini_batches > self.num_steps {
            return Err(Error::config("`num mini batch` exceeds `num steps`"));
        }
        self.optim().validate()?;
        self.stft.validate()?;
        if self.rir_length < self.stft.window_length {
            return Err(Error::config("`rir length` is shorter than the STFT window"));
        }
        self.loss_weights().validate()?;
        self.assignment.validate()?;
        for (k, v) in [("gamma", self.gamma), ("tau", self.tau), ("lambda", self.lambda), ("clip param", self.clip)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("`{k}` = {v} outside [0, 1]")));
            }
        }
        for (k, v) in [
            ("value loss coef", self.value_coef),
            ("entropy coef", self.entropy_coef),
            ("w m", self.w_m),
            ("w xi", self.w_xi),
            ("w sigma", self.w_sigma),
            ("w m omega", self.w_m_agents[0]),
            ("w m nu", self.w_m_agents[1]),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("`{k}` must be a nonnegative number")));
            }
        }
        if !(self.scene_width > 0.0 && self.scene_depth > 0.0 && self.scene_resolution > 0.0) {
            return Err(Error::config("scene dimensions must be positive"));
        }
        if self.train_scenes.is_empty() {
            return Err(Error::config("`train scenes` is empty"));
        }
        if self.eval_seeds.is_empty() {
            return Err(Error::config("`eval seeds` is empty"));
        }
        let splits = [("train", &self.train_scenes), ("val", &self.val_scenes), ("test", &self.test_scenes)];
        for (i, (a, sa)) in splits.iter().enumerate() {
            for (b, sb) in &splits[i + 1..] {
                if let Some(s) = sa.iter().find(|s| sb.contains(s)) {
                    return Err(Error::config(format!("scene {s} is in both the {a} and {b} splits")));
                }
            }
        }
        Ok(())
    }

    pub fn optim(&self) -> OptimConfig {
        OptimConfig { learning_rate: self.learning_rate, max_grad_norm: self.max_grad_norm, ..OptimConfig::default() }
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            clip: self.clip,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            agent_weights: self.w_m_agents,
            normalize_advantages: true,
        }
    }

    /// `(τ, mode)` actually used for advantages; without GAE, `τ = 1`.
    pub fn advantage(&self) -> (f64, AdvantageMode) {
        if self.use_gae {
            (self.tau, self.advantage_mode)
        } else {
            (1.0, AdvantageMode::Standard)
        }
    }

    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            patch_radius: self.patch_radius,
            fov90: self.fov90,
            encoder: self.encoder,
            hidden: self.hidden,
            raw_step: self.raw_step,
        }
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig {
            patch_len: self.policy().patch_len(),
            encoder: self.encoder,
            memory_width: self.memory_width,
            kappa: self.kappa,
            generator_hidden: self.generator_hidden,
            rir_length: self.rir_length,
            sample_rate: self.sample_rate,
        }
    }

    pub fn loss_weights(&self) -> PredictionLossWeights {
        PredictionLossWeights { w_mse: self.w_mse, ..PredictionLossWeights::default() }
    }

    pub fn scene_spec(&self, scene_seed: u64) -> SceneSpec {
        let mut spec = SceneSpec::random(scene_seed, self.scene_width, self.scene_depth, self.scene_resolution);
        spec.max_order = self.max_order;
        spec
    }

    pub fn build_scenes(&self, seeds: &[u64]) -> Result<Vec<NavScene>> {
        seeds.iter().map(|&s| build_scene(&self.scene_spec(s))).collect()
    }

    pub fn parse(text: &str, base: RunConfig) -> Result<RunConfig> {
        let mut cfg = base;
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.split_whitespace().collect::<Vec<_>>().join(" ");
            let value = value.trim();
            if seen.contains(&key) {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(&key, value).map_err(|e| match e {
                Error::Config(m) => Error::config(format!("line {}: {m}", lineno + 1)),
                other => other,
            })?;
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, base: RunConfig) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        RunConfig::parse(&text, base)
    }

    /// Sets one key by its config-file name.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "number of updates" => self.updates = num(key, v)?,
            "number of episodes" => self.episodes = num(key, v)?,
            "max steps" => self.max_steps = num(key, v)?,
            "num steps" => self.num_steps = num(key, v)?,
            "use linear learning rate decay" => self.lr_decay = boolean(key, v)?,
            "use linear clip decay" => self.clip_decay = boolean(key, v)?,
            "RIR sampling rate" => self.sample_rate = num(key, v)?,
            "rir length" => self.rir_length = num(key, v)?,
            "clip param" => self.clip = num(key, v)?,
            "ppo epoch" => self.ppo_epochs = num(key, v)?,
            "num mini batch" => self.mini_batches = num(key, v)?,
            "value loss coef" => self.value_coef = num(key, v)?,
            "entropy coef" => self.entropy_coef = num(key, v)?,
            "learning rate" => self.learning_rate = num(key, v)?,
            "max grad norm" => self.max_grad_norm = num(key, v)?,
            "use GAE" => self.use_gae = boolean(key, v)?,
            "advantage mode" => {
                self.advantage_mode = match v {
                    "standard" => AdvantageMode::Standard,
                    "literal" => AdvantageMode::Literal,
                    _ => return Err(Error::config(format!("`{key}` must be standard or literal"))),
                }
            }
            "reward window size" => self.reward_window = num(key, v)?,
            "window length" => self.stft.window_length = num(key, v)?,
            "window type" => {
                self.stft.window = match v {
                    "hamming" => WindowKind::Hamming,
                    "hann" => WindowKind::Hann,
                    _ => return Err(Error::config(format!("`{key}` must be hamming or hann"))),
                }
            }
            "fft size" => self.stft.fft_size = num(key, v)?,
            "shift size" => self.stft.shift = num(key, v)?,
            "number of processes" => self.workers = num(key, v)?,
            "w mse" => self.w_mse = num(key, v)?,
            "w m omega" => self.w_m_agents[0] = num(key, v)?,
            "w m nu" => self.w_m_agents[1] = num(key, v)?,
            "w m" => self.w_m = num(key, v)?,
            "w xi" => self.w_xi = num(key, v)?,
            "w sigma" => self.w_sigma = num(key, v)?,
            "alpha xi" => self.reward.xi = num(key, v)?,
            "alpha zeta" => self.reward.zeta = num(key, v)?,
            "alpha psi" => self.reward.psi = num(key, v)?,
            "alpha phi" => self.reward.phi = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "kappa" => self.kappa = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "hidden size" => self.hidden = num(key, v)?,
            "reward assignment" => self.assignment = parse_assignment(v)?,
            "seed" => self.seed = num(key, v)?,
            "scene width" => self.scene_width = num(key, v)?,
            "scene depth" => self.scene_depth = num(key, v)?,
            "scene resolution" => self.scene_resolution = num(key, v)?,
            "max order" => self.max_order = num(key, v)?,
            "train scenes" => self.train_scenes = seed_list(key, v)?,
            "val scenes" => self.val_scenes = seed_list(key, v)?,
            "test scenes" => self.test_scenes = seed_list(key, v)?,
            "eval seeds" => self.eval_seeds = seed_list(key, v)?,
            "patch radius" => self.patch_radius = num(key, v)?,
            "fov90" => self.fov90 = boolean(key, v)?,
            "raw step" => self.raw_step = boolean(key, v)?,
            "blind" => self.blind = boolean(key, v)?,
            "vision width" => self.encoder.vision = num(key, v)?,
            "azimuth width" => self.encoder.azimuth = num(key, v)?,
            "position width" => self.encoder.position = num(key, v)?,
            "memory width" => self.memory_width = num(key, v)?,
            "generator hidden" => self.generator_hidden = num(key, v)?,
            "checkpoint interval" => self.checkpoint_interval = num(key, v)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text(c), _) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("number of updates", self.updates.to_string());
        kv("number of episodes", self.episodes.to_string());
        kv("max steps", self.max_steps.to_string());
        kv("num steps", self.num_steps.to_string());
        kv("use linear learning rate decay", self.lr_decay.to_string());
        kv("use linear clip decay", self.clip_decay.to_string());
        kv("RIR sampling rate", self.sample_rate.to_string());
        kv("rir length", self.rir_length.to_string());
        kv("clip param", fmt_f(self.clip));
        kv("ppo epoch", self.ppo_epochs.to_string());
        kv("num mini batch", self.mini_batches.to_string());
        kv("value loss coef", fmt_f(self.value_coef));
        kv("entropy coef", fmt_f(self.entropy_coef));
        kv("learning rate", fmt_f(self.learning_rate));
        kv("max grad norm", fmt_f(self.max_grad_norm));
        kv("use GAE", self.use_gae.to_string());
        kv("advantage mode", match self.advantage_mode {
            AdvantageMode::Standard => "standard".into(),
            AdvantageMode::Literal => "literal".into(),
        });
        kv("reward window size", self.reward_window.to_string());
        kv("window length", self.stft.window_length.to_string());
        kv("window type", match self.stft.window {
            WindowKind::Hamming => "hamming".into(),
            WindowKind::Hann => "hann".into(),
        });
        kv("fft size", self.stft.fft_size.to_string());
        kv("shift size", self.stft.shift.to_string());
        kv("number of processes", self.workers.to_string());
        kv("w mse", fmt_f(self.w_mse));
        kv("w m omega", fmt_f(self.w_m_agents[0]));
        kv("w m nu", fmt_f(self.w_m_agents[1]));
        kv("w m", fmt_f(self.w_m));
        kv("w xi", fmt_f(self.w_xi));
        kv("w sigma", fmt_f(self.w_sigma));
        kv("alpha xi", fmt_f(self.reward.xi));
        kv("alpha zeta", fmt_f(self.reward.zeta));
        kv("alpha psi", fmt_f(self.reward.psi));
        kv("alpha phi", fmt_f(self.reward.phi));
        kv("gamma", fmt_f(self.gamma));
        kv("tau", fmt_f(self.tau));
        kv("kappa", self.kappa.to_string());
        kv("lambda", fmt_f(self.lambda));
        kv("hidden size", self.hidden.to_string());
        kv("reward assignment", format_assignment(self.assignment));
        kv("seed", self.seed.to_string());
        kv("scene width", fmt_f(self.scene_width));
        kv("scene depth", fmt_f(self.scene_depth));
        kv("scene resolution", fmt_f(self.scene_resolution));
        kv("max order", self.max_order.to_string());
        kv("train scenes", fmt_list(&self.train_scenes));
        kv("val scenes", fmt_list(&self.val_scenes));
        kv("test scenes", fmt_list(&self.test_scenes));
        kv("eval seeds", fmt_list(&self.eval_seeds));
        kv("patch radius", self.patch_radius.to_string());
        kv("fov90", self.fov90.to_string());
        kv("raw step", self.raw_step.to_string());
        kv("blind", self.blind.to_string());
        kv("vision width", self.encoder.vision.to_string());
        kv("azimuth width", self.encoder.azimuth.to_string());
        kv("position width", self.encoder.position.to_string());
        kv("memory width", self.memory_width.to_string());
        kv("generator hidden", self.generator_hidden.to_string());
        kv("checkpoint interval", self.checkpoint_interval.to_string());
        s
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(format!("`{key}` must be true or false"))),
    }
}

/// `full-shared`, `fixed <ρ>`, or `learned <ρ>`.
fn parse_assignment(v: &str) -> Result<AssignmentMode> {
    let mut parts = v.split_whitespace();
    let mode = match (parts.next(), parts.next()) {
        (Some("full-shared"), None) => AssignmentMode::FullShared,
        (Some("fixed"), Some(r)) => AssignmentMode::Fixed(num("reward assignment", r)?),
        (Some("learned"), Some(r)) => AssignmentMode::Learned(num("reward assignment", r)?),
        _ => return Err(Error::config("`reward assignment` must be `full-shared`, `fixed <rho>` or `learned <rho>`")),
    };
    if parts.next().is_some() {
        return Err(Error::config("trailing text after `reward assignment`"));
    }
    mode.validate()?;
    Ok(mode)
}

fn format_assignment(m: AssignmentMode) -> String {
    match m {
        AssignmentMode::FullShared => "full-shared".into(),
        AssignmentMode::Fixed(r) => format!("fixed {}", fmt_f(r)),
        AssignmentMode::Learned(r) => format!("learned {}", fmt_f(r)),
    }
}

/// Comma-separated seeds and half-open ranges `a..b`.
fn seed_list(key: &str, v: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (u64, u64) = (num(key, a.trim())?, num(key, b.trim())?);
            if b < a {
                return Err(Error::config(format!("`{key}`: empty range {item}")));
            }
            out.extend(a..b);
        } else {
            out.push(num(key, item)?);
        }
    }
    let mut sorted = out.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != out.len() {
        return Err(Error::config(format!("`{key}` lists a seed twice")));
    }
    Ok(out)
}

fn fmt_list(v: &[u64]) -> String {
    // Compress consecutive runs into ranges.
    let mut parts = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
            j += 1;
        }
        if j > i {
            parts.push(format!("{}..{}", v[i], v[j] + 1));
        } else {
            parts.push(v[i].to_string());
        }
        i = j + 1;
    }
    parts.join(", ")
}
