//! Experiment harness: configuration, environment loop, training,
//! evaluation, analyses and reports.

pub mod analysis;
pub mod config;
pub mod env;
pub mod eval;
pub mod rollout;
pub mod report;
pub mod trace;
pub mod train;

pub use analysis::{action_intervention, normalize_importance, pe_intervention, Intervention, Modality};
pub use config::RunConfig;
pub use eval::{build_nn_bank, evaluate, EvalOptions, EvalOutcome, ModelKind};
pub use env::{EnvContext, Episode, NnBank, PredictSource};
pub use report::{write_report, ReportOutcome};
pub use trace::{load_traces, write_traces, EpisodeTrace, TraceMeta, TraceStep};
pub use train::{pretrain_generator, stream_rng, train, ProbeSet, TrainOutcome, TrainedModels, UpdateLog};

/// Root directory for generated data (`RIRNAV_DATA`, default `./data`).
pub fn data_root() -> std::path::PathBuf {
    std::env::var_os("RIRNAV_DATA").map(Into::into).unwrap_or_else(|| "data".into())
}
