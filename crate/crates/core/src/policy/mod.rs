//! Per-agent observation encoders, recurrent actor-critic heads, advantage
//! estimation and the PPO motion loss.

mod encoder;
mod gae;
mod net;
mod ppo;

pub use encoder::{EncoderCache, EncoderInput, EncoderWidths, ObsEncoder, ObsFeatures, Observation, POSITION_SCALE};
pub use gae::{compute_gae, AdvantageMode};
pub use net::{policy_step, sample_action, ActionDist, AgentNet, AgentForward, PolicyConfig, PolicyNet};
pub use ppo::{normalize_advantages, ppo_motion_loss, AgentLoss, MotionLoss, PpoConfig, StepRecord, TrajectoryBuffer};
