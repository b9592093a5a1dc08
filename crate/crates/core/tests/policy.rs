use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rirnav::learn::*;
use rirnav::policy::*;
use rirnav::scene::{Action, Heading};

fn cfg() -> PolicyConfig {
    PolicyConfig { patch_radius: 1, fov90: false, encoder: EncoderWidths { vision: 4, azimuth: 3, position: 3 }, hidden: 5, raw_step: false }
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng, scale: f64) {
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.param_mut(id).data_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}

fn obs(rng: &mut ChaCha8Rng, step: usize) -> Observation {
    Observation {
        vision: (0..9).map(|_| if rng.random_bool(0.7) { 1.0 } else { 0.0 }).collect(),
        heading: Heading::from_quarter_turns(rng.random_range(0..4)),
        step,
        horizon: 20,
        position: [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 1.5],
    }
}

fn relu_layer(store: &ParamStore, d: &Dense, x: &[f64]) -> Vec<f64> {
    let w = store.param(d.weight);
    let b = store.param(d.bias);
    (0..d.outputs).map(|j| ((0..d.inputs).map(|i| x[i] * w.get(i, j)).sum::<f64>() + b.get(0, j)).max(0.0)).collect()
}

#[test]
fn encoder_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let net = AgentNet::new(&mut store, "a", &cfg(), &mut rng).unwrap();
    randomize(&mut store, &mut rng, 1.0);
    let enc = net.encoder;
    let o = obs(&mut rng, 3);
    let f = o.features(false);
    assert_eq!(f.azimuth[2], 3.0 / 20.0);
    assert!((f.azimuth[0] - o.heading.radians().sin()).abs() < 1e-15);
    let out = enc.forward(&store, &EncoderInput::from_features([&f]).unwrap()).unwrap().out;
    let mut manual = relu_layer(&store, &enc.vision, &f.vision);
    manual.extend(relu_layer(&store, &enc.azimuth, &f.azimuth));
    manual.extend(relu_layer(&store, &enc.position, &f.position));
    for (a, b) in out.data().iter().zip(&manual) {
        assert!((a - b).abs() < 1e-12);
    }

    // blind: the vision block is relu(bias)
    let blind = ObsFeatures { vision: vec![0.0; 9], ..f.clone() };
    let out = enc.forward(&store, &EncoderInput::from_features([&blind]).unwrap()).unwrap().out;
    for j in 0..4 {
        assert_eq!(out.get(0, j), store.param(enc.vision.bias).get(0, j).max(0.0));
    }

    // only the step differs: only the azimuth block may change
    let later = Observation { step: 11, ..o.clone() }.features(false);
    let a = enc.forward(&store, &EncoderInput::from_features([&f]).unwrap()).unwrap().out;
    let b = enc.forward(&store, &EncoderInput::from_features([&later]).unwrap()).unwrap().out;
    for j in (0..4).chain(7..10) {
        assert_eq!(a.get(0, j), b.get(0, j));
    }
    assert!((4..7).any(|j| a.get(0, j) != b.get(0, j)));
}

#[test]
fn policy_step_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let net = AgentNet::new(&mut store, "a", &cfg(), &mut rng).unwrap();
    let zeroed = {
        let mut s = store.clone();
        for id in s.ids().collect::<Vec<_>>() {
            s.param_mut(id).fill(0.0);
        }
        s
    };
    let e = Tensor2::row_vector(&[0.3; 10]);
    let h = Tensor2::zeros(1, 5);
    let (d, v, _) = policy_step(&zeroed, &net, &e, &h).unwrap();
    assert_eq!(d.0, [0.25; 4]);
    assert_eq!(v, 0.0);
    assert!((d.entropy() - 4f64.ln()).abs() < 1e-12);

    for _ in 0..20 {
        randomize(&mut store, &mut rng, 2.0);
        let e = Tensor2::from_vec(1, 10, (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (d, _, h1) = policy_step(&store, &net, &e, &h).unwrap();
        assert!((d.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(d.0.iter().all(|&p| p >= 0.0));
        assert!(d.entropy() >= 0.0 && d.entropy() <= 4f64.ln() + 1e-12);
        assert!(h1.data().iter().all(|v| v.abs() < 1.0));
    }

    // a near-deterministic head: sampling agrees with greedy
    let mut peaked = zeroed.clone();
    peaked.param_mut(net.actor.bias).data_mut().copy_from_slice(&[0.0, 0.0, 8.0, 0.0]);
    let (d, _, _) = policy_step(&peaked, &net, &e, &h).unwrap();
    assert!(d.0[2] > 0.99);
    assert_eq!(d.greedy(), Action::TurnRight);
    let mut srng = ChaCha8Rng::seed_from_u64(9);
    let agree = (0..200).filter(|_| sample_action(&d, &mut srng) == Action::TurnRight).count();
    assert!(agree >= 195, "{agree}");
}

#[test]
fn gae_closed_forms() {
    let (a, r) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.99, 0.95, AdvantageMode::Standard);
    assert_eq!((a[0], r[0]), (1.0, 1.0));
    let (a, _) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.99, 0.95, AdvantageMode::Literal);
    assert!((a[0] - 0.9801).abs() < 1e-15);
    for mode in [AdvantageMode::Standard, AdvantageMode::Literal] {
        let (a, _) = compute_gae(&[0.0; 6], &[0.0; 6], &[false; 6], 0.0, 0.99, 0.95, mode);
        assert!(a.iter().all(|&v| v == 0.0));
    }
}

/// Direct double sum over each episode segment.
fn gae_oracle(r: &[f64], v: &[f64], dones: &[bool], boot: f64, g: f64, tau: f64, mode: AdvantageMode) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if dones[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { boot };
            r[t] + g * next - v[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut s = 0.0;
            for i in t..n {
                s += match mode {
                    AdvantageMode::Standard => (g * tau).powi((i - t) as i32),
                    AdvantageMode::Literal => g.powi((i + 2 - t) as i32),
                } * delta[i];
                if dones[i] {
                    break;
                }
            }
            s
        })
        .collect()
}

#[test]
fn gae_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..20 {
        let n = 10;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dones: Vec<bool> = (0..n).map(|i| k % 2 == 1 && (i == 4 || rng.random_bool(0.1))).collect();
        let boot = rng.random_range(-1.0..1.0);
        for mode in [AdvantageMode::Standard, AdvantageMode::Literal] {
            let (a, ret) = compute_gae(&r, &v, &dones, boot, 0.99, 0.95, mode);
            for (x, y) in a.iter().zip(gae_oracle(&r, &v, &dones, boot, 0.99, 0.95, mode)) {
                assert!((x - y).abs() < 1e-12);
            }
            for t in 0..n {
                assert!((ret[t] - a[t] - v[t]).abs() < 1e-15);
            }
        }
        // τ = 1 on a terminal trajectory is the Monte-Carlo advantage
        let mut d = vec![false; n];
        d[n - 1] = true;
        let (a, _) = compute_gae(&r, &v, &d, 0.0, 0.99, 1.0, AdvantageMode::Standard);
        for t in 0..n {
            let mc: f64 = (t..n).map(|i| 0.99f64.powi((i - t) as i32) * r[i]).sum();
            assert!((a[t] - (mc - v[t])).abs() < 1e-10);
        }
    }
}

/// Buffers whose behaviour log-probs are the current ones shifted by `shift`.
fn buffers(store: &ParamStore, net: &PolicyNet, rng: &mut ChaCha8Rng, n: usize, shift: f64) -> [TrajectoryBuffer; 2] {
    std::array::from_fn(|j| {
        let mut buf = TrajectoryBuffer::default();
        let mut h = vec![0.0; 5];
        for t in 0..n {
            let features = obs(rng, t).features(false);
            let input = EncoderInput::from_features([&features]).unwrap();
            let fwd = net.agents[j].forward(store, &input, &Tensor2::row_vector(&h)).unwrap();
            let action = rng.random_range(0..4);
            buf.steps.push(StepRecord {
                features,
                h_prev: h.clone(),
                action,
                log_prob: fwd.dist(0).log_prob(Action::ALL[action]) + shift * rng.random_range(-1.0..1.0),
                value: fwd.value(0),
                reward: rng.random_range(-1.0..1.0),
                done: t + 1 == n,
            });
            h = fwd.state().row(0).to_vec();
        }
        buf.compute_advantages(0.99, 0.95, AdvantageMode::Standard);
        buf
    })
}

fn policy_net(seed: u64) -> (ParamStore, PolicyNet, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let net = PolicyNet::new(&mut store, &cfg(), &mut rng).unwrap();
    randomize(&mut store, &mut rng, 0.5);
    (store, net, rng)
}

#[test]
fn first_epoch_identity() {
    let (mut store, net, mut rng) = policy_net(4);
    let bufs = buffers(&store, &net, &mut rng, 6, 0.0);
    let ppo = PpoConfig::default();
    let loss = ppo_motion_loss(&mut store, &net, [&bufs[0], &bufs[1]], &ppo, 0.0).unwrap();
    for (j, a) in loss.agents.iter().enumerate() {
        let adv = normalize_advantages(&bufs[j].advantages);
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        assert!((a.policy + mean).abs() < 1e-12);
        assert!(a.policy.abs() < 1e-12);
        assert_eq!(a.clip_fraction, 0.0);
        assert!((a.total - (a.value + a.policy - 0.02 * a.entropy)).abs() < 1e-12);
    }
    assert!((loss.total - 0.5 * loss.agents[0].total - 0.5 * loss.agents[1].total).abs() < 1e-12);
    assert_eq!(store.grad_sq_norm(), 0.0);
}

#[test]
fn motion_loss_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let (mut store, net, mut rng) = policy_net(50 + seed);
        // behaviour policy close enough that no ratio reaches the clip edge
        let bufs = buffers(&store, &net, &mut rng, 3, 0.03);
        let ppo = PpoConfig::default();
        let rep = finite_diff_check(&mut store, 1e-6, |s| {
            s.zero_grads();
            ppo_motion_loss(s, &net, [&bufs[0], &bufs[1]], &ppo, 1.0).unwrap().total
        });
        assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
    }
}

#[test]
fn clipped_steps_pass_no_policy_gradient() {
    let (mut store, net, mut rng) = policy_net(7);
    let mut bufs = buffers(&store, &net, &mut rng, 8, 0.0);
    // push every ratio outside the clip range in the direction of its advantage
    for b in &mut bufs {
        let adv = normalize_advantages(&b.advantages);
        for (s, a) in b.steps.iter_mut().zip(adv) {
            s.log_prob += if a > 0.0 { -0.5 } else { 0.5 };
        }
    }
    let ppo = PpoConfig { entropy_coef: 0.0, value_coef: 0.0, ..Default::default() };
    let loss = ppo_motion_loss(&mut store, &net, [&bufs[0], &bufs[1]], &ppo, 1.0).unwrap();
    assert_eq!(loss.agents[0].clip_fraction, 1.0);
    assert_eq!(store.grad_sq_norm(), 0.0);
}

#[test]
fn one_update_decreases_bandit_loss() {
    // single node: observations never change, rewards favour MoveForward
    let (mut store, net, mut rng) = policy_net(8);
    let o = Observation { vision: vec![1.0; 9], heading: Heading::EAST, step: 0, horizon: 1, position: [1.0, 1.0, 1.5] };
    let features = o.features(false);
    let bufs: [TrajectoryBuffer; 2] = std::array::from_fn(|j| {
        let input = EncoderInput::from_features([&features]).unwrap();
        let fwd = net.agents[j].forward(&store, &input, &Tensor2::zeros(1, 5)).unwrap();
        let mut buf = TrajectoryBuffer::default();
        for _ in 0..16 {
            let action = rng.random_range(0..4);
            buf.steps.push(StepRecord {
                features: features.clone(),
                h_prev: vec![0.0; 5],
                action,
                log_prob: fwd.dist(0).log_prob(Action::ALL[action]),
                value: fwd.value(0),
                reward: if action == 0 { 1.0 } else { 0.0 },
                done: true,
            });
        }
        buf.compute_advantages(0.99, 0.95, AdvantageMode::Standard);
        buf
    });
    let ppo = PpoConfig::default();
    let before = ppo_motion_loss(&mut store, &net, [&bufs[0], &bufs[1]], &ppo, 1.0).unwrap().total;
    clip_global_norm(&mut store, 0.5);
    adam_update(&mut store, &OptimConfig { learning_rate: 1e-3, ..Default::default() }).unwrap();
    let after = ppo_motion_loss(&mut store, &net, [&bufs[0], &bufs[1]], &ppo, 0.0).unwrap().total;
    assert!(after < before, "{before} -> {after}");
}
