use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxdetect::audio::{frame_signal, AudioClip, FrameGrid};
use voxdetect::spectral::{istft, stft};

const SR: u32 = 16_000;

fn clip(x: Vec<f64>) -> AudioClip<f64> {
    AudioClip::new(x, SR, "s").unwrap()
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

#[test]
fn round_trip_on_random_clips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..20 {
        let n = rng.gen_range(2_000..20_000);
        let x = noise(seed, n);
        let c = clip(x.clone());
        let grid = frame_signal(&c, 40.0, 20.0).unwrap();
        let y = istft(&stft(&c, &grid, 1024).unwrap()).unwrap();
        assert_eq!(y.len(), x.len());
        // interior: covered by two frames
        let end = grid.covered_len() - grid.frame_len() + grid.hop();
        let err = (grid.hop()..end).map(|i| (x[i] - y.samples()[i]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "clip {seed}: {err}");
    }
}

#[test]
fn zero_in_zero_out() {
    let c = clip(vec![0.0; 4000]);
    let grid = frame_signal(&c, 40.0, 20.0).unwrap();
    let s = stft(&c, &grid, 1024).unwrap();
    assert!(s.bins().iter().all(|b| b.norm() == 0.0));
    assert!(istft(&s).unwrap().samples().iter().all(|&v| v == 0.0));
}

#[test]
fn parseval_per_frame() {
    let x = noise(5, 3200);
    let c = clip(x.clone());
    let grid = frame_signal(&c, 40.0, 20.0).unwrap();
    let s = stft(&c, &grid, 1024).unwrap();
    let w = hamming(640);
    for i in 0..grid.n_frames() {
        let start = grid.frame_start(i);
        let time: f64 = (0..640).map(|n| (x[start + n] * w[n]).powi(2)).sum();
        let row = s.bins().row(i);
        let last = row.len() - 1;
        let spec: f64 = row
            .iter()
            .enumerate()
            .map(|(k, b)| if k == 0 || k == last { b.norm_sqr() } else { 2.0 * b.norm_sqr() })
            .sum::<f64>()
            / 1024.0;
        assert!((time - spec).abs() <= 1e-6 * time);
    }
}

#[test]
fn sine_peaks_at_its_bin() {
    for k in [16usize, 64, 200, 400] {
        let f = k as f64 * SR as f64 / 1024.0;
        let x: Vec<f64> = (0..4000).map(|n| (2.0 * PI * f * n as f64 / SR as f64).sin()).collect();
        let c = clip(x);
        let grid = frame_signal(&c, 40.0, 20.0).unwrap();
        let mag = stft(&c, &grid, 1024).unwrap().magnitude();
        for row in mag.rows() {
            let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(peak, k);
        }
    }
}

#[test]
fn bins_match_direct_dft() {
    let x = noise(8, 1280);
    let c = clip(x.clone());
    let grid = frame_signal(&c, 40.0, 20.0).unwrap();
    let s = stft(&c, &grid, 1024).unwrap();
    assert_eq!(s.n_bins(), 513);
    let w = hamming(640);
    for k in [0usize, 1, 77, 512] {
        let mut acc = Complex::new(0.0, 0.0);
        for n in 0..640 {
            acc += Complex::from_polar(x[320 + n] * w[n], -2.0 * PI * (k * n) as f64 / 1024.0);
        }
        assert!((acc - s.bins()[[1, k]]).norm() < 1e-9);
    }
}

#[test]
fn contract_errors() {
    let c = clip(vec![0.1; 4000]);
    let grid = frame_signal(&c, 40.0, 20.0).unwrap();
    assert!(stft(&c, &grid, 320).is_err());
    assert!(stft(&c, &grid, 1000).is_err());
    let no_overlap = FrameGrid::new(640, 640, 5, SR).unwrap();
    let s = stft(&c, &no_overlap, 1024).unwrap();
    assert!(istft(&s).is_err());
}

#[test]
fn gain_of_one_is_identity() {
    let c = clip(noise(9, 3000));
    let grid = frame_signal(&c, 40.0, 20.0).unwrap();
    let s = stft(&c, &grid, 1024).unwrap();
    let g = s.apply_gain(&Array2::ones((s.n_frames(), s.n_bins()))).unwrap();
    assert_eq!(g.bins(), s.bins());
    assert!(s.apply_gain(&Array2::ones((1, 1))).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stft_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (x, y) = (noise(seed, 2000), noise(seed + 1000, 2000));
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let grid = FrameGrid::for_length(2000, 640, 320, SR).unwrap();
        let (sx, sy, sz) = (
            stft(&clip(x), &grid, 1024).unwrap(),
            stft(&clip(y), &grid, 1024).unwrap(),
            stft(&clip(z), &grid, 1024).unwrap(),
        );
        let scale = sz.bins().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for ((p, q), r) in sx.bins().iter().zip(sy.bins()).zip(sz.bins()) {
            prop_assert!((p * a + q * b - r).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn stft_is_deterministic(seed in 0u64..1000) {
        let c = clip(noise(seed, 1500));
        let grid = frame_signal(&c, 40.0, 20.0).unwrap();
        prop_assert_eq!(stft(&c, &grid, 1024).unwrap(), stft(&c, &grid, 1024).unwrap());
    }
}
