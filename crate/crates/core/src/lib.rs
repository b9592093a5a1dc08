//! Two-agent simulator for measuring room impulse response fields.
//!
//! An emitter and a receiver move over the navigability graph of a room.
//! At every step the receiver's binaural impulse response is computed by an
//! image-source oracle and predicted by a learned generator; the agents are
//! trained with PPO on a reward built from prediction improvement, coverage
//! and the geometry of their joint footprint.

pub mod acoustics;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod learn;
pub mod metrics;
pub mod policy;
pub mod predictor;
pub mod rewards;
pub mod scene;
pub mod spectral;

pub use error::{Error, Result};
