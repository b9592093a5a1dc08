use rirnav::harness::*;
use rirnav::learn::{Checkpoint, ParamStore};
use rirnav::metrics::coverage_rate;
use rirnav::policy::EncoderWidths;
use rirnav::scene::NavScene;

/// A configuration small enough for many short runs.
fn small() -> RunConfig {
    RunConfig {
        updates: 3,
        max_steps: 12,
        num_steps: 24,
        workers: 1,
        rir_length: 800,
        hidden: 16,
        encoder: EncoderWidths { vision: 8, azimuth: 4, position: 4 },
        memory_width: 8,
        generator_hidden: 16,
        scene_width: 3.0,
        scene_depth: 3.0,
        max_order: 3,
        train_scenes: vec![0, 1],
        val_scenes: vec![100],
        test_scenes: vec![200, 201],
        eval_seeds: vec![0, 1],
        episodes: 2,
        ..RunConfig::desk()
    }
}

fn scenes(cfg: &RunConfig, seeds: &[u64]) -> Vec<NavScene> {
    cfg.build_scenes(seeds).unwrap()
}

/// Exact parameter contents, for bit-level comparisons.
fn bytes(store: &ParamStore) -> Vec<u8> {
    Checkpoint::from_stores(&[store]).to_bytes()
}

fn no_waveforms() -> EvalOptions {
    EvalOptions { waveform_metrics: false, ..Default::default() }
}

#[test]
fn config_text_round_trip_and_rejections() {
    let cfg = small().with_learned_assignment(0.25);
    let back = RunConfig::parse(&cfg.to_text(), RunConfig::desk()).unwrap();
    assert_eq!(back, cfg);
    let paper = RunConfig::paper();
    assert_eq!(RunConfig::parse(&paper.to_text(), RunConfig::desk()).unwrap(), paper);

    assert!(RunConfig::parse("number of updates = 5\nbogus key = 1\n", RunConfig::desk()).is_err());
    assert!(RunConfig::parse("gamma = 0.9\ngamma = 0.8\n", RunConfig::desk()).is_err());
    assert!(RunConfig::parse("train scenes = 1, 2\ntest scenes = 2, 3\n", RunConfig::desk()).is_err());
    assert!(RunConfig::parse("val scenes = 5\ntest scenes = 5\n", RunConfig::desk()).is_err());
    assert!(RunConfig::parse("w mse = 1.5\n", RunConfig::desk()).is_err());
    let ok = RunConfig::parse("# comment\nmax steps = 32  # trailing\n\n", RunConfig::desk()).unwrap();
    assert_eq!(ok.max_steps, 32);
}

#[test]
fn one_update_smoke_run_writes_loadable_checkpoint() {
    let cfg = RunConfig { updates: 1, scene_width: 1.5, scene_depth: 1.5, train_scenes: vec![7], ..small() };
    let train_s = scenes(&cfg, &cfg.train_scenes);
    assert_eq!(train_s[0].node_count(), 16);
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, &train_s, None, Some(dir.path()), &mut |_| {}).unwrap();
    assert_eq!(out.logs.len(), 1);
    let ckpt = Checkpoint::load(&dir.path().join("checkpoint.bin")).unwrap();
    let loaded = TrainedModels::from_checkpoint(&cfg, &ckpt).unwrap();
    assert_eq!(loaded.checkpoint().to_bytes(), out.models.checkpoint().to_bytes());
    let saved_cfg = RunConfig::load(&dir.path().join("config.txt"), RunConfig::desk()).unwrap();
    assert_eq!(saved_cfg, cfg);
    assert!(std::fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap().lines().count() == 1);
}

#[test]
fn zero_prediction_weight_leaves_predictor_untouched() {
    let cfg = RunConfig { updates: 2, w_xi: 0.0, ..small() };
    let train_s = scenes(&cfg, &cfg.train_scenes);
    let init = TrainedModels::init(&cfg).unwrap();
    let out = train(&cfg, &train_s, Some(init.clone()), None, &mut |_| {}).unwrap();
    assert_eq!(bytes(&out.models.predictor_store), bytes(&init.predictor_store));
    assert_ne!(bytes(&out.models.policy_store), bytes(&init.policy_store));
}

#[test]
fn logged_total_matches_components() {
    for cfg in [small(), small().with_learned_assignment(0.0), RunConfig { w_mse: 0.5, ..small() }] {
        let train_s = scenes(&cfg, &cfg.train_scenes);
        let out = train(&cfg, &train_s, None, None, &mut |_| {}).unwrap();
        for l in &out.logs {
            let expect = cfg.w_m * l.l_m + cfg.w_xi * l.l_xi.total + cfg.w_sigma * l.l_sigma;
            assert!((l.total - expect).abs() < 1e-9, "{} vs {}", l.total, expect);
            assert_eq!((l.w_m, l.w_xi, l.w_sigma), (cfg.w_m, cfg.w_xi, cfg.w_sigma));
            assert!((l.l_m - 0.5 * l.motion.agents[0].total - 0.5 * l.motion.agents[1].total).abs() < 1e-9);
            assert!(l.total.is_finite());
        }
    }
}

#[test]
fn pretraining_touches_only_the_predictor() {
    let cfg = small();
    let train_s = scenes(&cfg, &cfg.train_scenes);
    let init = TrainedModels::init(&cfg).unwrap();
    let probe = ProbeSet::collect(&cfg, &scenes(&cfg, &cfg.val_scenes), &init, 48).unwrap();
    let before = probe.loss(&cfg, &init).unwrap().total;
    let out = pretrain_generator(&cfg, &train_s, Some(init.clone()), 40, &mut |_, _| {}).unwrap();
    assert_eq!(bytes(&out.models.policy_store), bytes(&init.policy_store));
    assert_ne!(bytes(&out.models.predictor_store), bytes(&init.predictor_store));
    let after = probe.loss(&cfg, &out.models).unwrap().total;
    assert!(after < before, "{before} -> {after}");

    // the pretrained generator seeds a training run
    let mut fresh = TrainedModels::init(&cfg).unwrap();
    fresh.load_predictor(&out.models.checkpoint()).unwrap();
    assert_eq!(bytes(&fresh.predictor_store), bytes(&out.models.predictor_store));
    let trained = train(&cfg, &train_s, Some(fresh), None, &mut |_| {}).unwrap();
    assert_eq!(trained.logs.len(), cfg.updates);
}

#[test]
fn evaluation_reports_and_traces() {
    let cfg = small();
    let test_s = scenes(&cfg, &cfg.test_scenes);
    let models = TrainedModels::init(&cfg).unwrap();
    let a = evaluate(&cfg, &test_s, &models, ModelKind::Random, None, EvalOptions::default()).unwrap();
    let b = evaluate(&cfg, &test_s, &models, ModelKind::Random, None, EvalOptions::default()).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.report.episodes.len(), test_s.len() * cfg.eval_seeds.len() * cfg.episodes);

    for (row, trace) in a.report.episodes.iter().zip(&a.traces) {
        let scene = &test_s[row.scene];
        assert_eq!(row.cr, coverage_rate(trace.visited_nodes(), scene.node_count()));
        assert_eq!(trace.replay_mismatch(scene), None);
        assert!(trace.steps.len() <= cfg.max_steps + 1);
        // shared mode: both agents receive the whole reward
        for s in &trace.steps[1..] {
            assert_eq!(s.shares, (s.reward.total, s.reward.total));
        }
    }

    // a tampered trace no longer replays
    let mut bad = a.traces[0].clone();
    bad.steps[2].phi += 1.0;
    assert_eq!(bad.replay_mismatch(&test_s[0]), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    write_traces(&path, &a.traces).unwrap();
    assert_eq!(load_traces(&path).unwrap(), a.traces);

    for kind in [ModelKind::Trained, ModelKind::Occupancy, ModelKind::Curiosity] {
        let o = evaluate(&cfg, &test_s, &models, kind, None, no_waveforms()).unwrap();
        assert_eq!(o.report.episodes.len(), a.report.episodes.len());
        // start poses do not depend on the model
        for (x, y) in o.traces.iter().zip(&a.traces) {
            assert_eq!(x.steps[0].poses, y.steps[0].poses);
        }
    }
    assert!(evaluate(&cfg, &test_s, &models, ModelKind::NearestNeighbor, None, no_waveforms()).is_err());
    let bank = build_nn_bank(&cfg, &scenes(&cfg, &cfg.train_scenes), &models, 1).unwrap();
    let nn = evaluate(&cfg, &test_s, &models, ModelKind::NearestNeighbor, Some(&bank), no_waveforms()).unwrap();
    assert!(nn.report.episodes.iter().all(|e| e.pe.is_finite()));
}

#[test]
fn learned_assignment_conserves_reward_in_traces() {
    let cfg = small().with_learned_assignment(0.0);
    let train_s = scenes(&cfg, &cfg.train_scenes);
    let out = train(&cfg, &train_s, None, None, &mut |_| {}).unwrap();
    let o = evaluate(&cfg, &scenes(&cfg, &cfg.test_scenes), &out.models, ModelKind::Trained, None, no_waveforms()).unwrap();
    for t in &o.traces {
        for s in &t.steps[1..] {
            assert_eq!(s.shares.0 + s.shares.1, s.reward.total);
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let cfg = RunConfig { eval_seeds: vec![0], episodes: 1, ..small() };
    let test_s = scenes(&cfg, &cfg.test_scenes);
    let models = TrainedModels::init(&cfg).unwrap();
    let o = evaluate(&cfg, &test_s, &models, ModelKind::Random, None, no_waveforms()).unwrap();

    let empty = tempfile::tempdir().unwrap();
    let r = write_report(&empty.path().join("out"), &cfg, &[], Some(&models)).unwrap();
    assert!(r.files.is_empty() && !r.warnings.is_empty());
    assert!(!empty.path().join("out").exists());

    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let r1 = write_report(d1.path(), &cfg, &o.traces, Some(&models)).unwrap();
    let r2 = write_report(d2.path(), &cfg, &o.traces, Some(&models)).unwrap();
    assert_eq!(r1.files.len(), r2.files.len());
    for (a, b) in r1.files.iter().zip(&r2.files) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
    let svg = r1.files.iter().find(|p| p.to_string_lossy().contains("trajectory_")).unwrap();
    let text = std::fs::read_to_string(svg).unwrap();
    assert_eq!(text.matches("<circle").count(), test_s[0].node_count());
}

#[test]
fn intervention_normalization() {
    assert_eq!(normalize_importance([0.2, 0.2, 0.2]), [1.0 / 3.0; 3]);
    let n = normalize_importance([1.0, 3.0, 0.0]);
    assert_eq!(n, [0.25, 0.75, 0.0]);

    let cfg = RunConfig { eval_seeds: vec![0], episodes: 1, ..small() };
    let test_s = scenes(&cfg, &cfg.test_scenes[..1]);
    let mut models = TrainedModels::init(&cfg).unwrap();
    // an encoder that ignores vision
    for a in &models.policy.agents.clone() {
        models.policy_store.param_mut(a.encoder.vision.weight).fill(0.0);
    }
    let imp = action_intervention(&cfg, &test_s, &models).unwrap();
    assert!(!imp.rows.is_empty());
    for r in &imp.rows {
        assert_eq!(r.raw[0], 0.0);
        assert!((r.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    for m in imp.mean {
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let pe = pe_intervention(&cfg, &test_s, &models).unwrap();
    let mut buf = Vec::new();
    pe.write_csv(&mut buf).unwrap();
    assert!(!buf.is_empty());
}

#[test]
fn short_training_raises_episode_reward() {
    // 8 x 8 m rooms, 200 updates, five seeds
    let base = RunConfig { updates: 200, workers: 2, train_scenes: (0..4).collect(), ..RunConfig::desk() };
    let train_s = scenes(&base, &base.train_scenes);
    for seed in 0..5 {
        let cfg = RunConfig { seed, ..base.clone() };
        let out = train(&cfg, &train_s, None, None, &mut |_| {}).unwrap();
        let windows: Vec<f64> = out.logs.iter().filter_map(|l| l.reward_window_mean).collect();
        let (first, last) = (windows[0], *windows.last().unwrap());
        assert!(last > first, "seed {seed}: {first} -> {last}");
    }
}
