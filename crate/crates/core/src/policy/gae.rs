use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdvantageMode {
    /// `Â_t = Σ_{i≥t} (γτ)^{i-t} δ_i`.
    Standard,
    /// `Â_t = Σ_{i≥t} γ^{i+2-t} δ_i`, with no `τ`.
    Literal,
}

/// Advantages and returns (`Â + V`) for a rollout segment.
///
/// `values[t]` is `V(s_t)`, `dones[t]` marks that the episode ended after
/// step `t`, and `bootstrap` is `V(s_T)` for the state following the last
/// step (ignored if that step is terminal). Sums never cross an episode end.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    tau: f64,
    mode: AdvantageMode,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values must align with rewards");
    assert_eq!(dones.len(), n, "dones must align with rewards");
    let deltas: Vec<f64> = (0..n)
        .map(|t| {
            let next = if dones[t] {
                0.0
            } else if t + 1 < n {
                values[t + 1]
            } else {
                bootstrap
            };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    let mut adv = vec![0.0; n];
    match mode {
        AdvantageMode::Standard => {
            let mut running = 0.0;
            for t in (0..n).rev() {
                if dones[t] {
                    running = 0.0;
                }
                running = deltas[t] + gamma * tau * running;
                adv[t] = running;
            }
        }
        AdvantageMode::Literal => {
            // S_t = Σ_{i≥t} γ^{i-t} δ_i, then Â_t = γ² S_t.
            let mut running = 0.0;
            for t in (0..n).rev() {
                if dones[t] {
                    running = 0.0;
                }
                running = deltas[t] + gamma * running;
                adv[t] = gamma * gamma * running;
            }
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}
