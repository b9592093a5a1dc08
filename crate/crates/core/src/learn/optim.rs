use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 2e-4,
            max_grad_norm: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-5,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be > 0"));
        }
        if !(self.max_grad_norm > 0.0 && self.max_grad_norm.is_finite()) {
            return Err(Error::config("max grad norm must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam epsilon must be > 0"));
        }
        Ok(())
    }
}

/// Bias-corrected Adam step over every block, then zeroes the gradients.
///
/// A block whose gradient is identically zero is left untouched (parameters
/// and moments), so a zero-gradient call is the identity on parameters.
pub fn adam_update(store: &mut ParamStore, cfg: &OptimConfig) -> Result<()> {
    for id in store.ids() {
        if !store.grad(id).is_finite() {
            return Err(Error::Training {
                block: store.name(id).to_string(),
                msg: "non-finite gradient".into(),
            });
        }
    }
    store.step += 1;
    let t = store.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for i in 0..store.len() {
        let id = super::ParamId(i);
        if store.grad(id).data().iter().all(|&g| g == 0.0) {
            continue;
        }
        let grad = store.grad(id).data().to_vec();
        let m = store.first_moment[i].data_mut();
        for (m, g) in m.iter_mut().zip(&grad) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        }
        let v = store.second_moment[i].data_mut();
        for (v, g) in v.iter_mut().zip(&grad) {
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        }
        let m = store.first_moment[i].data().to_vec();
        let v = store.second_moment[i].data().to_vec();
        let p = store.param_mut(id).data_mut();
        for ((p, m), v) in p.iter_mut().zip(&m).zip(&v) {
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    store.zero_grads();
    Ok(())
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grad_sq_norm().sqrt();
    if norm > max_norm {
        store.scale_grads(max_norm / norm);
    }
    norm
}
