//! Comparison policies (random, occupancy, curiosity) and the
//! nearest-neighbor RIR predictor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{hull_stats, step_action, Action, AgentPose, NavScene};

/// Uniform over the three movement actions; `Stop` once `step ≥ max_steps`.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, step: usize, max_steps: usize) -> Action {
    if step >= max_steps {
        return Action::Stop;
    }
    Action::MOVEMENT[rng.random_range(0..3)]
}

fn hull_area_after(scene: &NavScene, mover: AgentPose, next: AgentPose, other: AgentPose) -> f64 {
    hull_stats(scene.ground(next.node), scene.ground(other.node), scene.ground(mover.node), scene.ground(other.node)).area
}

/// Greedy action for one agent, the other held in place: maximizes the
/// area of the hull of `(A', B, A, B)`. A blocked `MoveForward` is not a
/// candidate; ties go to the earlier action in `Action::MOVEMENT`.
pub fn occupancy_action(scene: &NavScene, mover: AgentPose, other: AgentPose) -> Action {
    let mut best: Option<(Action, f64)> = None;
    for action in Action::MOVEMENT {
        let (next, moved) = step_action(scene, mover, action);
        if action == Action::MoveForward && !moved {
            continue;
        }
        let area = hull_area_after(scene, mover, next, other);
        if best.is_none_or(|(_, a)| area > a) {
            best = Some((action, area));
        }
    }
    best.map(|(a, _)| a).unwrap_or(Action::TurnLeft)
}

/// [`occupancy_action`] for both agents.
pub fn occupancy_policy(scene: &NavScene, poses: [AgentPose; 2]) -> [Action; 2] {
    [occupancy_action(scene, poses[0], poses[1]), occupancy_action(scene, poses[1], poses[0])]
}

/// Move into an unvisited faced node; otherwise turn toward an unvisited
/// neighbor (left, then right, then behind via a left turn); otherwise a
/// uniformly random movement action. `visited` is the joint visited set.
pub fn curiosity_policy<R: Rng + ?Sized>(scene: &NavScene, pose: AgentPose, visited: &[bool], rng: &mut R) -> Action {
    let neighbor = |h: crate::scene::Heading| scene.neighbors[pose.node][h.quarter_turns()];
    let unvisited = |n: Option<usize>| n.is_some_and(|n| !visited[n]);
    let h = pose.heading;
    if unvisited(neighbor(h)) {
        Action::MoveForward
    } else if unvisited(neighbor(h.left())) {
        Action::TurnLeft
    } else if unvisited(neighbor(h.right())) {
        Action::TurnRight
    } else if unvisited(neighbor(h.left().left())) {
        Action::TurnLeft
    } else {
        Action::MOVEMENT[rng.random_range(0..3)]
    }
}

/// A stored training latent and the key of its ground-truth response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub scene: usize,
    /// `f_r ⊕ f_m`.
    pub latent: Vec<f64>,
    pub listener_heading_deg: u32,
    pub listener_node: usize,
    pub source_node: usize,
    /// Index of the ground-truth response in the accompanying store.
    pub rir_index: usize,
}

fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

/// `−KL(softmax(query) ‖ softmax(stored))`; always ≤ 0.
pub fn latent_similarity(query: &[f64], stored: &[f64]) -> f64 {
    let lq = log_softmax(query);
    let ls = log_softmax(stored);
    let kl: f64 = lq.iter().zip(&ls).map(|(a, b)| a.exp() * (a - b)).sum();
    -kl.max(0.0)
}

/// Index of the most similar record; ties go to the lowest index.
pub fn nearest_neighbor_index(query: &[f64], bank: &[LatentRecord]) -> Result<usize> {
    if bank.is_empty() {
        return Err(Error::domain("nearest-neighbor bank is empty"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, rec) in bank.iter().enumerate() {
        if rec.latent.len() != query.len() {
            return Err(Error::domain(format!("latent width {} vs query width {}", rec.latent.len(), query.len())));
        }
        let s = latent_similarity(query, &rec.latent);
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// The stored response of the nearest record.
pub fn nearest_neighbor_predict<'a, T>(query: &[f64], bank: &[LatentRecord], responses: &'a [T]) -> Result<&'a T> {
    let i = nearest_neighbor_index(query, bank)?;
    responses
        .get(bank[i].rir_index)
        .ok_or_else(|| Error::domain(format!("record {i} points past the response store")))
}
