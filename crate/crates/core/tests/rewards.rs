use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rirnav::learn::{finite_diff_check, ParamStore, Tensor2};
use rirnav::rewards::*;
use rirnav::scene::HullStats;

fn levels(delta: f64, coverage: f64, perimeter: f64, area: f64) -> StepLevels {
    StepLevels::new(delta, coverage, HullStats { perimeter, area })
}

#[test]
fn step_reward_examples() {
    let c = RewardCoefs::default();
    let r = step_reward(&c, &levels(2.0, 0.1, 1.0, 0.5), &levels(3.0, 0.1, 1.0, 0.5));
    assert_eq!((r.r_xi, r.total), (1.0, 1.0));
    let r = step_reward(&c, &levels(2.0, 0.12, 1.0, 0.5), &levels(2.0, 0.10, 1.0, 0.5));
    assert!((r.r_zeta - 0.02).abs() < 1e-15);
    let r = step_reward(&c, &levels(2.0, 0.1, 3.0, 0.5), &levels(2.0, 0.1, 2.0, 0.5));
    assert_eq!(r.r_psi, -1.0);
    let r = step_reward(&c, &levels(2.0, 0.1, 3.0, 0.75), &levels(2.0, 0.1, 3.0, 0.5));
    assert_eq!(r.r_phi, 0.25);
}

#[test]
fn tracker_seeds_with_zero_and_telescopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let c = RewardCoefs { xi: rng.random_range(-2.0..2.0), zeta: rng.random_range(-2.0..2.0), psi: rng.random_range(-2.0..2.0), phi: rng.random_range(-2.0..2.0) };
        let seq: Vec<StepLevels> = (0..30)
            .map(|_| levels(rng.random_range(0.0..5.0), rng.random_range(0.0..1.0), rng.random_range(0.0..10.0), rng.random_range(0.0..6.0)))
            .collect();
        let mut t = RewardTracker::new(c);
        let first = t.observe(seq[0]);
        assert_eq!(first.total, 0.0);
        let mut sums = [0.0; 5];
        for l in &seq[1..] {
            let r = t.observe(*l);
            assert!((r.total - (r.r_xi + r.r_zeta + r.r_psi + r.r_phi)).abs() < 1e-15);
            for (s, v) in sums.iter_mut().zip([r.r_xi, r.r_zeta, r.r_psi, r.r_phi, r.total]) {
                *s += v;
            }
        }
        let (a, b) = (seq[0], seq[29]);
        let expect = [-c.xi * (b.delta - a.delta), c.zeta * (b.coverage - a.coverage), c.psi * (b.perimeter - a.perimeter), c.phi * (b.area - a.area)];
        for k in 0..4 {
            assert!((sums[k] - expect[k]).abs() < 1e-10);
        }
        assert!((sums[4] - expect.iter().sum::<f64>()).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn reward_ignores_delta_offset(d0 in 0.0f64..5.0, d1 in 0.0f64..5.0, k in -10.0f64..10.0) {
        let c = RewardCoefs::default();
        let a = step_reward(&c, &levels(d1, 0.0, 0.0, 0.0), &levels(d0, 0.0, 0.0, 0.0));
        let b = step_reward(&c, &levels(d1 + k, 0.0, 0.0, 0.0), &levels(d0 + k, 0.0, 0.0, 0.0));
        prop_assert!((a.r_xi - b.r_xi).abs() < 1e-12);
    }

    #[test]
    fn learned_assignment_conserves(rho in 0.0f64..=1.0, w in 0.0f64..=1.0, r in -10.0f64..10.0) {
        let a = assign_rewards(AssignmentMode::Learned(rho), r, Some((w, 1.0 - w))).unwrap();
        prop_assert!((a.r_omega + a.r_nu - r).abs() < 1e-12);
        prop_assert!(a.sigma_loss < 1e-20);
    }
}

#[test]
fn assignment_examples() {
    let a = assign_rewards(AssignmentMode::Learned(0.0), 3.0, Some((0.9, 0.1))).unwrap();
    assert_eq!((a.r_omega, a.r_nu), (1.5, 1.5));
    let a = assign_rewards(AssignmentMode::Learned(1.0), 1.0, Some((0.7, 0.3))).unwrap();
    assert!((a.r_omega - 0.7).abs() < 1e-15 && (a.r_nu - 0.3).abs() < 1e-15);
    assert!(a.sigma_loss < 1e-30);
    let a = assign_rewards(AssignmentMode::FullShared, 2.5, None).unwrap();
    assert_eq!((a.r_omega, a.r_nu, a.sigma_loss), (2.5, 2.5, 0.0));
    let a = assign_rewards(AssignmentMode::Fixed(0.5), 2.0, None).unwrap();
    assert_eq!((a.r_omega, a.r_nu), (0.5, 0.5));
    assert!(assign_rewards(AssignmentMode::Fixed(1.5), 1.0, None).is_err());
    assert!(assign_rewards(AssignmentMode::Learned(-0.1), 1.0, Some((0.5, 0.5))).is_err());
    assert!(assign_rewards(AssignmentMode::Learned(0.5), 1.0, None).is_err());
}

#[test]
fn head_weights_are_a_distribution_and_conserve() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let head = AssignmentHead::new(&mut store, "assign", 6, &mut rng).unwrap();
    for _ in 0..50 {
        let so: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let sn: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let r = rng.random_range(-5.0..5.0);
        let (wo, wn) = head.weights(&store, &so, &sn, r).unwrap();
        assert!((0.0..=1.0).contains(&wo) && (0.0..=1.0).contains(&wn));
        assert!((wo + wn - 1.0).abs() < 1e-12);
        let rho = rng.random_range(0.0..=1.0);
        let a = assign_rewards(AssignmentMode::Learned(rho), r, Some((wo, wn))).unwrap();
        assert!((a.r_omega + a.r_nu - r).abs() < 1e-12);
    }
}

#[test]
fn head_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(10 + seed);
        let mut store = ParamStore::new();
        let head = AssignmentHead::new(&mut store, "assign", 3, &mut rng).unwrap();
        let inputs = Tensor2::from_vec(4, 7, (0..28).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rep = finite_diff_check(&mut store, 1e-6, |s| {
            s.zero_grads();
            let cache = head.forward(s, &inputs).unwrap();
            let loss: f64 = cache.weights.data().iter().zip(&c).map(|(w, c)| w * c).sum();
            let d = Tensor2::from_vec(4, 2, c.clone()).unwrap();
            head.backward(s, &cache, &d);
            loss
        });
        assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
    }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

fn unique_argmax(v: &[f64]) -> bool {
    let m = argmax(v);
    v.iter().enumerate().all(|(i, x)| i == m || *x < v[m])
}

/// Exhaustive 16-way joint enumeration.
fn joint_argmax(qo: &[f64], qn: &[f64], wo: f64, wn: f64) -> (usize, usize) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for a in 0..4 {
        for b in 0..4 {
            let v = wo * qo[a] + wn * qn[b];
            if v > best.2 {
                best = (a, b, v);
            }
        }
    }
    (best.0, best.1)
}

#[test]
fn monotone_decomposition() {
    assert!(monotone_decomposition_check(&[1.0, 0.0, 0.0, 0.0], &[0.0, 2.0, 0.0, 0.0], 1.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 1000 {
        let qo: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let qn: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        if !unique_argmax(&qo) || !unique_argmax(&qn) {
            continue;
        }
        let (wo, wn) = (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0));
        assert_eq!(joint_argmax(&qo, &qn, wo, wn), (argmax(&qo), argmax(&qn)));
        assert!(monotone_decomposition_check(&qo, &qn, wo, wn));
        checked += 1;
    }
    // a negative weight breaks it: search for a counterexample
    let found = (0..1000).any(|_| {
        let qo: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let qn: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        !monotone_decomposition_check(&qo, &qn, -1.0, 1.0)
    });
    assert!(found);
}
