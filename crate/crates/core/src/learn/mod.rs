//! Small differentiable-computation substrate.
//!
//! Networks here are fixed dense/GRU stacks with hand-derived backward
//! passes. Parameters live in a [`ParamStore`], layers hold [`ParamId`]
//! handles into it, and the forward pass returns a cache that the backward
//! pass consumes.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod store;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use layers::{
    categorical_entropy, dense_forward, gru_step, log_softmax, softmax_rows, Activation, Dense,
    DenseOut, Gru, GruOut, LEAKY_SLOPE,
};
pub use optim::{adam_update, clip_global_norm, OptimConfig};
pub use store::{ParamId, ParamStore};
pub use tensor::Tensor2;
