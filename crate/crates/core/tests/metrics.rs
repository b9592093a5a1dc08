use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rirnav::acoustics::BinauralRIR;
use rirnav::metrics::*;

#[test]
fn weighted_coverage() {
    assert_eq!(pes(0.0), 0.0);
    assert!((wcr(0.5, 0.0, 0.1) - 0.55).abs() < 1e-15);
    // 2/(1+e^{-x}) − 1 = 1/2  ⇔  e^{-x} = 1/3
    assert!((pes(3f64.ln()) - 0.5).abs() < 1e-15);
    assert!((wcr(0.4, 1e3, 0.1) - 0.36).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (cr, pe) = (rng.random_range(0.0..1.0), rng.random_range(0.0..5.0));
        let w = wcr(cr, pe, WCR_LAMBDA);
        assert!((0.0..=1.0).contains(&w));
        assert!(wcr(cr + 0.01, pe, WCR_LAMBDA) > w);
        assert!(wcr(cr, pe + 0.01, WCR_LAMBDA) < w);
    }
}

#[test]
fn coverage_examples() {
    assert_eq!(coverage_rate(0..16, 16), 1.0);
    assert_eq!(coverage_rate([3, 3, 3], 16), 1.0 / 16.0);
    assert_eq!(coverage_rate([3, 5, 3, 5], 16), 2.0 / 16.0);
}

/// Noise under an `e^{-t/τ}` envelope; its energy falls 60 dB in `3τ ln 10`.
fn decaying_noise(rng: &mut ChaCha8Rng, tau: f64, fs: u32, secs: f64) -> Vec<f64> {
    let n = (secs * fs as f64) as usize;
    (0..n).map(|i| rng.random_range(-1.0..1.0) * (-(i as f64) / fs as f64 / tau).exp()).collect()
}

#[test]
fn rt60_of_exponential_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let expect = 3.0 * 0.05 * 10f64.ln();
    let h = decaying_noise(&mut rng, 0.05, 16000, 1.0);
    let t = rt60(&h, 16000).unwrap();
    assert!((t - expect).abs() < 0.05 * expect, "{t}");
    let scaled: Vec<f64> = h.iter().map(|v| 7.5 * v).collect();
    assert!((rt60(&scaled, 16000).unwrap() - t).abs() < 1e-9);
    let h2 = decaying_noise(&mut rng, 0.025, 16000, 1.0);
    assert!((rt60(&h2, 16000).unwrap() - expect / 2.0).abs() < 0.05 * expect / 2.0);
    assert!(rt60(&[0.0; 100], 16000).is_err());
    let mut short = vec![0.0; 100];
    short[0] = 1.0;
    short[1] = 0.5;
    assert!(rt60(&short, 16000).is_err());
}

#[test]
fn rte_between_envelopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pair = |rng: &mut ChaCha8Rng, tau: f64| {
        let l = decaying_noise(rng, tau, 16000, 1.0);
        let r = decaying_noise(rng, tau, 16000, 1.0);
        let peak = l.iter().chain(&r).fold(0.0f64, |m, v| m.max(v.abs()));
        let s = |v: &Vec<f64>| v.iter().map(|x| (x / peak) as f32).collect::<Vec<_>>();
        BinauralRIR::from_channels(16000, &s(&l), &s(&r)).unwrap()
    };
    let a = pair(&mut rng, 0.05);
    let b = pair(&mut rng, 0.055);
    assert_eq!(rte(&a, &a).unwrap(), 0.0);
    let expect = 1000.0 * 3.0 * 0.005 * 10f64.ln();
    let got = rte(&a, &b).unwrap();
    assert!((got - expect).abs() < 0.15 * expect, "{got} vs {expect}");
    assert_eq!(got, rte(&b, &a).unwrap());
}

#[test]
fn sisdr_cases() {
    let t = vec![10.0, 0.0, 0.0];
    assert!((sisdr(&t, &[10.0, 1.0, 0.0], false).unwrap() - 20.0).abs() < 1e-12);
    assert_eq!(sisdr(&t, &t, false).unwrap(), SISDR_CAP_DB);
    assert!(sisdr(&t, &[0.0; 3], false).unwrap().abs() < 1e-12);
    assert!(sisdr(&[0.0; 3], &t, false).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eps = 1e-3;
    let p: Vec<f64> = w.iter().map(|v| v * (1.0 + eps)).collect();
    let expect = 10.0 * (1.0 / (eps * eps)).log10();
    assert!((sisdr(&w, &p, false).unwrap() - expect).abs() < 0.01 * expect);
    // the projected variant ignores the gain
    assert_eq!(sisdr(&w, &p, true).unwrap(), SISDR_CAP_DB);
}

#[test]
fn metrics_are_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = decaying_noise(&mut rng, 0.03, 16000, 0.5);
    let a = rt60(&h, 16000).unwrap();
    let _ = sisdr(&h, &h, false);
    assert_eq!(rt60(&h, 16000).unwrap(), a);
}

#[test]
fn report_csv_round_trip() {
    let mut report = MetricsReport::new(0.1);
    for (seed, cr) in [(0u64, 0.2), (0, 0.4), (1, 0.6)] {
        report.push(EpisodeMetrics {
            model: "m".into(),
            scene: 1,
            seed,
            episode: 0,
            cr,
            pe: 1.0,
            pes: pes(1.0),
            wcr: wcr(cr, 1.0, 0.1),
            rte_ms: if seed == 0 { None } else { Some(12.5) },
            sisdr_db: -3.0,
            rte_skipped: 1,
        });
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let back = MetricsReport::read_csv(std::str::from_utf8(&buf).unwrap(), 0.1).unwrap();
    assert_eq!(back.episodes.len(), 3);
    assert_eq!(back.episodes[0].rte_ms, None);
    let s = report.summary();
    // seed means 0.3 and 0.6
    assert!((s.cr.mean - 0.45).abs() < 1e-12 && (s.cr.std - 0.15).abs() < 1e-12);
    assert_eq!((s.rte_ms.n, s.rte_skipped), (1, 3));
    assert!(MetricsReport::read_csv("nope\n", 0.1).is_err());
}
