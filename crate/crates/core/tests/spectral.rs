use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rirnav::acoustics::BinauralRIR;
use rirnav::spectral::*;

fn small() -> StftConfig {
    StftConfig { fft_size: 64, shift: 8, window_length: 40, window: WindowKind::Hamming }
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Windowed frame, zero-padded, by a direct O(N²) DFT.
fn naive_frame(wave: &[f64], cfg: &StftConfig, f: usize) -> Vec<f64> {
    let w = cfg.window_coefficients();
    let x: Vec<f64> = (0..cfg.window_length).map(|i| wave[f * cfg.shift + i] * w[i]).collect();
    (0..cfg.bins())
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * n) as f64 / cfg.fft_size as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

#[test]
fn matches_naive_dft_and_frame_count() {
    let cfg = small();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wave = noise(&mut rng, 157);
    let s = stft_magnitude(&wave, &cfg).unwrap();
    assert_eq!(s.frames, (157 - 40) / 8 + 1);
    assert_eq!(s.bins, 33);
    for f in 0..s.frames {
        for (a, b) in s.frame(f).iter().zip(naive_frame(&wave, &cfg, f)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
    assert!(stft_magnitude(&wave[..39], &cfg).is_err());
    assert!(stft_magnitude(&[0.0; 100], &cfg).unwrap().data.iter().all(|&v| v == 0.0));
}

#[test]
fn hamming_window_is_periodic() {
    let w = StftConfig::default().window_coefficients();
    assert_eq!(w.len(), 600);
    assert!((w[0] - 0.08).abs() < 1e-12);
    assert!((w[300] - 1.0).abs() < 1e-12);
}

#[test]
fn parseval_per_frame() {
    let cfg = StftConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let wave = noise(&mut rng, 2000);
    let s = stft_magnitude(&wave, &cfg).unwrap();
    let w = cfg.window_coefficients();
    let n = cfg.fft_size;
    for f in 0..s.frames {
        // one-sided spectrum: interior bins stand for two conjugate bins
        let m = s.frame(f);
        let full: f64 = m.iter().enumerate().map(|(k, v)| if k == 0 || k == n / 2 { v * v } else { 2.0 * v * v }).sum();
        let direct: f64 = (0..cfg.window_length).map(|i| (wave[f * cfg.shift + i] * w[i]).powi(2)).sum();
        assert!((full - n as f64 * direct).abs() < 1e-6 * full);
    }
}

#[test]
fn bin_aligned_sine_concentrates() {
    let cfg = StftConfig::default();
    let k0 = 64;
    let wave: Vec<f64> = (0..2000).map(|n| (2.0 * PI * k0 as f64 * n as f64 / cfg.fft_size as f64).sin()).collect();
    let s = stft_magnitude(&wave, &cfg).unwrap();
    for f in 0..s.frames {
        let e: Vec<f64> = s.frame(f).iter().map(|v| v * v).collect();
        let total: f64 = e.iter().sum();
        let near: f64 = e[k0 - 1..=k0 + 1].iter().sum();
        assert!(near >= 0.8 * total, "frame {f}: {}", near / total);
    }
}

fn spec(rng: &mut ChaCha8Rng, frames: usize, bins: usize) -> Spectrogram {
    Spectrogram { frames, bins, data: (0..frames * bins).map(|_| rng.random_range(0.0..2.0)).collect() }
}

#[test]
fn loss_terms_against_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (z, zh) = (spec(&mut rng, 7, 5), spec(&mut rng, 7, 5));
        let (mut num, mut den, mut log) = (0.0, 0.0, 0.0);
        for f in 0..7 {
            for k in 0..5 {
                let (a, b) = (z.data[f * 5 + k], zh.data[f * 5 + k]);
                num += (a - b) * (a - b);
                den += a * a;
                log += ((a + 1e-7) / (b + 1e-7)).ln().abs();
            }
        }
        assert!((spectral_convergence(&z, &zh).unwrap() - (num / den).sqrt()).abs() < 1e-12);
        assert!((log_stft_magnitude(&z, &zh).unwrap() - log / 35.0).abs() < 1e-12);
    }
}

#[test]
fn loss_term_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = spec(&mut rng, 4, 9).scaled(1.0);
    let z = Spectrogram { data: z.data.iter().map(|v| v + 0.1).collect(), ..z };
    assert_eq!(spectral_convergence(&z, &z).unwrap(), 0.0);
    assert!((spectral_convergence(&z, &z.scaled(0.5)).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(log_stft_magnitude(&z, &z).unwrap(), 0.0);
    assert!((log_stft_magnitude(&z, &z.scaled(std::f64::consts::E)).unwrap() - 1.0).abs() < 1e-5);
    let zero = z.scaled(0.0);
    assert!(spectral_convergence(&zero, &z).is_err());
    let other = spec(&mut rng, 3, 9);
    assert!(spectral_convergence(&z, &other).is_err());
}

proptest! {
    #[test]
    fn convergence_of_scaled_copy(alpha in 0.0f64..2.0, seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = spec(&mut rng, 3, 4);
        prop_assume!(z.frobenius() > 0.0);
        prop_assert!((spectral_convergence(&z, &z.scaled(alpha)).unwrap() - (1.0 - alpha).abs()).abs() < 1e-12);
    }

    #[test]
    fn magnitude_is_positively_homogeneous(alpha in 0.01f64..100.0, seed in 0u64..100) {
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wave = noise(&mut rng, 80);
        let a = stft_magnitude(&wave, &cfg).unwrap();
        let b = stft_magnitude(&wave.iter().map(|v| v * alpha).collect::<Vec<_>>(), &cfg).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((alpha * x - y).abs() <= 1e-9 * (alpha * x).max(1.0));
        }
    }

    #[test]
    fn distance_is_nonnegative_and_zero_on_self(seed in 0u64..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = BinauralRIR::from_f64(16000, &noise(&mut rng, 160)).unwrap();
        let b = BinauralRIR::from_f64(16000, &noise(&mut rng, 160)).unwrap();
        let stft = Stft::new(small()).unwrap();
        prop_assert_eq!(stft.distance(&a, &a).unwrap(), 0.0);
        prop_assert!(stft.distance(&a, &b).unwrap() >= 0.0);
    }
}

fn rir(rng: &mut ChaCha8Rng, len: usize) -> BinauralRIR {
    // decaying noise keeps magnitudes well above the log floor
    let v: Vec<f64> = (0..2 * len).map(|i| rng.random_range(-1.0..1.0) * (-((i % len) as f64) / len as f64).exp()).collect();
    BinauralRIR::from_f64(16000, &v).unwrap()
}

#[test]
fn distance_of_half_copy() {
    let cfg = StftConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = rir(&mut rng, 2000);
    let half = BinauralRIR::from_f64(16000, &w.to_f64().iter().map(|v| 0.5 * v).collect::<Vec<_>>()).unwrap();
    let d = stft_distance(&w, &half, &cfg).unwrap();
    // Θ part is exactly 0.25; Ξ part ≈ 0.5 ln 2
    assert!((d - 0.25 - 0.5 * 2f64.ln()).abs() < 1e-3, "{d}");
    assert_eq!(stft_distance(&w, &w, &cfg).unwrap(), 0.0);
}

#[test]
fn distance_recomposes_from_components() {
    let cfg = small();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let (a, b) = (rir(&mut rng, 200), rir(&mut rng, 200));
        let mut expect = 0.0;
        for c in 0..2 {
            let z = stft_magnitude(&a.channel_f64(c), &cfg).unwrap();
            let zh = stft_magnitude(&b.channel_f64(c), &cfg).unwrap();
            expect += 0.25 * spectral_convergence(&z, &zh).unwrap() + 0.25 * log_stft_magnitude(&z, &zh).unwrap();
        }
        let d = stft_distance(&a, &b, &cfg).unwrap();
        assert!((d - expect).abs() < 1e-12);
        // Δ of a fixed pair does not depend on what else is being scored
        let stft = Stft::new(cfg).unwrap();
        let batch1: Vec<f64> = [(&a, &b)].iter().map(|(x, y)| stft.distance(x, y).unwrap()).collect();
        let batch3: Vec<f64> = [(&a, &b), (&b, &a), (&a, &a)].iter().map(|(x, y)| stft.distance(x, y).unwrap()).collect();
        assert_eq!(batch1[0], batch3[0]);
    }
}

#[test]
fn wave_gradient_matches_finite_differences() {
    let cfg = StftConfig { fft_size: 32, shift: 6, window_length: 20, window: WindowKind::Hamming };
    let stft = Stft::new(cfg).unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let target = stft.magnitude(&noise(&mut rng, 64)).unwrap();
        let pred = noise(&mut rng, 64);
        let (_, grad) = stft.terms_with_grad(&target, &pred, true).unwrap();
        let grad = grad.unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..pred.len() {
            let mut p = pred.clone();
            p[i] += h;
            let plus = stft.terms_with_grad(&target, &p, false).unwrap().0.distance();
            p[i] -= 2.0 * h;
            let minus = stft.terms_with_grad(&target, &p, false).unwrap().0.distance();
            let num = (plus - minus) / (2.0 * h);
            worst = worst.max((num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-6));
        }
        assert!(worst < 1e-4, "seed {seed}: {worst}");
    }
}
