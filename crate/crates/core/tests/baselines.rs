use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rirnav::baselines::*;
use rirnav::scene::*;

fn open(w: f64, d: f64) -> NavScene {
    build_scene(&SceneSpec::open(w, d, 3.0, 0.5)).unwrap()
}

#[test]
fn random_policy_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 30_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let a = random_policy(&mut rng, 3, 10);
        counts[Action::MOVEMENT.iter().position(|&m| m == a).unwrap()] += 1;
    }
    let e = n as f64 / 3.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // χ²(2) at p = 0.01
    assert!(chi2 < 9.21, "{counts:?}");
    assert!(counts.iter().all(|&c| (c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01));
    assert_eq!(random_policy(&mut rng, 10, 10), Action::Stop);
    let mut a = ChaCha8Rng::seed_from_u64(9);
    let mut b = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<Action> = (0..50).map(|t| random_policy(&mut a, t, 40)).collect();
    let ys: Vec<Action> = (0..50).map(|t| random_policy(&mut b, t, 40)).collect();
    assert_eq!(xs, ys);
    assert!(xs[..40].iter().all(|&x| x != Action::Stop));
}

/// Hull area as the largest shoelace area over every triangle and every
/// ordering of the four points.
fn hull_area(p: [[f64; 2]; 4]) -> f64 {
    let shoelace = |idx: &[usize]| {
        let n = idx.len();
        (0..n).map(|i| {
            let (a, b) = (p[idx[i]], p[idx[(i + 1) % n]]);
            a[0] * b[1] - b[0] * a[1]
        }).sum::<f64>().abs() / 2.0
    };
    let mut best: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                if a != b && b != c && a != c {
                    best = best.max(shoelace(&[a, b, c]));
                    let d = 6 - a - b - c;
                    best = best.max(shoelace(&[a, b, c, d]));
                }
            }
        }
    }
    best
}

fn occupancy_oracle(s: &NavScene, mover: AgentPose, other: AgentPose) -> Action {
    let mut best: Option<(Action, f64)> = None;
    for a in [Action::MoveForward, Action::TurnLeft, Action::TurnRight] {
        let next = match a {
            Action::MoveForward => match s.neighbors[mover.node][mover.heading.quarter_turns()] {
                Some(n) => n,
                None => continue,
            },
            _ => mover.node,
        };
        let area = hull_area([s.ground(next), s.ground(other.node), s.ground(mover.node), s.ground(other.node)]);
        if best.is_none_or(|(_, b)| area > b + 1e-12) {
            best = Some((a, area));
        }
    }
    best.unwrap().0
}

#[test]
fn occupancy_policy_examples_and_oracle() {
    let s = open(3.0, 3.0);
    let a = AgentPose { node: s.node_at(2, 2).unwrap(), heading: Heading::NORTH };
    let b = AgentPose { node: s.node_at(3, 2).unwrap(), heading: Heading::EAST };
    // stepping off the line A–B opens up a triangle
    assert_eq!(occupancy_action(&s, a, b), Action::MoveForward);
    // moving along the line gains nothing: all areas zero, MoveForward wins the tie
    let c = AgentPose { node: a.node, heading: Heading::WEST };
    assert_eq!(occupancy_action(&s, c, b), Action::MoveForward);
    // blocked forward is not a candidate
    let corner = AgentPose { node: s.node_at(0, 0).unwrap(), heading: Heading::WEST };
    assert_eq!(occupancy_action(&s, corner, b), Action::TurnLeft);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..100 {
        let scene = build_scene(&SceneSpec::random(k, 4.0, 3.5, 0.5)).unwrap();
        let pose = |rng: &mut ChaCha8Rng| AgentPose {
            node: rng.random_range(0..scene.node_count()),
            heading: Heading::from_quarter_turns(rng.random_range(0..4)),
        };
        let (p, q) = (pose(&mut rng), pose(&mut rng));
        assert_eq!(occupancy_action(&scene, p, q), occupancy_oracle(&scene, p, q), "case {k}");
        assert_eq!(occupancy_policy(&scene, [p, q]), [occupancy_action(&scene, p, q), occupancy_action(&scene, q, p)]);
    }
}

#[test]
fn curiosity_policy_cases() {
    let s = open(3.0, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centre = s.node_at(3, 3).unwrap();
    let pose = AgentPose { node: centre, heading: Heading::EAST };
    let mut visited = vec![false; s.node_count()];
    visited[centre] = true;
    assert_eq!(curiosity_policy(&s, pose, &visited, &mut rng), Action::MoveForward);
    visited[s.node_at(4, 3).unwrap()] = true;
    assert_eq!(curiosity_policy(&s, pose, &visited, &mut rng), Action::TurnLeft);
    visited[s.node_at(3, 4).unwrap()] = true;
    assert_eq!(curiosity_policy(&s, pose, &visited, &mut rng), Action::TurnRight);
    visited[s.node_at(3, 2).unwrap()] = true;
    assert_eq!(curiosity_policy(&s, pose, &visited, &mut rng), Action::TurnLeft);
    visited[s.node_at(2, 3).unwrap()] = true;
    let mut counts = [0usize; 3];
    for _ in 0..3000 {
        let a = curiosity_policy(&s, pose, &visited, &mut rng);
        counts[Action::MOVEMENT.iter().position(|&m| m == a).unwrap()] += 1;
    }
    assert!(counts.iter().all(|&c| (c as f64 / 3000.0 - 1.0 / 3.0).abs() < 0.03), "{counts:?}");
}

fn kl_softmax(p: &[f64], q: &[f64]) -> f64 {
    let norm = |v: &[f64]| {
        let z: f64 = v.iter().map(|x| x.exp()).sum();
        v.iter().map(|x| x.exp() / z).collect::<Vec<_>>()
    };
    let (p, q) = (norm(p), norm(q));
    p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum()
}

fn record(latent: Vec<f64>, i: usize) -> LatentRecord {
    LatentRecord { scene: 0, latent, listener_heading_deg: 0, listener_node: i, source_node: 0, rir_index: i }
}

#[test]
fn nearest_neighbor() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bank: Vec<LatentRecord> = (0..50).map(|i| record((0..8).map(|_| rng.random_range(-2.0..2.0)).collect(), i)).collect();
    let responses: Vec<usize> = (0..50).map(|i| 1000 + i).collect();
    assert_eq!(latent_similarity(&bank[7].latent, &bank[7].latent), 0.0);
    assert_eq!(*nearest_neighbor_predict(&bank[7].latent, &bank, &responses).unwrap(), 1007);
    for _ in 0..100 {
        let q: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let oracle = (0..50).min_by(|&a, &b| kl_softmax(&q, &bank[a].latent).total_cmp(&kl_softmax(&q, &bank[b].latent))).unwrap();
        assert_eq!(nearest_neighbor_index(&q, &bank).unwrap(), oracle);
        assert!(bank.iter().all(|r| latent_similarity(&q, &r.latent) <= 0.0));
        assert_eq!(nearest_neighbor_index(&q, &bank[3..4]).unwrap(), 0);
    }
    // softmax is shift invariant, so a shifted copy is also a perfect match
    let shifted: Vec<f64> = bank[9].latent.iter().map(|v| v + 3.0).collect();
    assert!(latent_similarity(&shifted, &bank[9].latent).abs() < 1e-12);
    assert!(nearest_neighbor_index(&[0.0; 8], &[]).is_err());
    assert!(nearest_neighbor_index(&[0.0; 3], &bank).is_err());
}
