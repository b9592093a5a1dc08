use super::{ParamId, ParamStore};

/// Result of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Block and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Denominator floor of the relative error; entries whose analytic and
/// numeric gradients are both below it are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient produced by `loss` against central
/// differences for every scalar parameter.
///
/// `loss` must zero the gradients, evaluate the scalar loss and accumulate
/// its gradient into the store. `eps` is clamped to `[1e-7, 1e-3]`.
pub fn finite_diff_check<F>(store: &mut ParamStore, eps: f64, mut loss: F) -> GradCheckReport
where
    F: FnMut(&mut ParamStore) -> f64,
{
    let eps = eps.clamp(1e-7, 1e-3);
    loss(store);
    let analytic: Vec<Vec<f64>> = store.ids().map(|id| store.grad(id).data().to_vec()).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (b, grads) in analytic.iter().enumerate() {
        let id = ParamId(b);
        for (k, &a) in grads.iter().enumerate() {
            let orig = store.param(id).data()[k];
            store.param_mut(id).data_mut()[k] = orig + eps;
            let plus = loss(store);
            store.param_mut(id).data_mut()[k] = orig - eps;
            let minus = loss(store);
            store.param_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    store.zero_grads();
    report
}
