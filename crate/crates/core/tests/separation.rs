mod common;

use common::{correlation, loop_with_bursts, tiled_loop, transient_routing, SR};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxdetect::audio::{frame_signal, AudioClip};
use voxdetect::separation::{beat_spectrum, estimate_period, repet_mask, separate, SeparationConfig};
use voxdetect::spectral::{istft, stft};
use voxdetect::synth::{synth_clip, SynthConfig};
use voxdetect::Error;

fn clip(x: Vec<f64>) -> AudioClip<f64> {
    AudioClip::new(x, SR, "t").unwrap()
}

/// Per-row unbiased autocorrelation of the power, by direct summation.
fn beat_oracle(mag: &Array2<f64>) -> Vec<f64> {
    let n = mag.nrows();
    let max_lag = 3 * n / 4;
    let mut acc = vec![0.0; max_lag + 1];
    for k in 0..mag.ncols() {
        let p: Vec<f64> = (0..n).map(|t| mag[[t, k]].powi(2)).collect();
        let r = |lag: usize| (0..n - lag).map(|t| p[t] * p[t + lag]).sum::<f64>() / (n - lag) as f64;
        let r0 = r(0);
        if r0 > 0.0 {
            for (lag, a) in acc.iter_mut().enumerate() {
                *a += r(lag) / r0;
            }
        }
    }
    let b0 = acc[0];
    acc.iter().map(|v| (v / b0).min(1.0)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn beat_spectrum_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mag = Array2::from_shape_fn((37, 9), |_| rng.gen_range(0.0..3.0));
    let bs = beat_spectrum(mag.view()).unwrap();
    let oracle = beat_oracle(&mag);
    assert_eq!(bs.values().len(), oracle.len());
    for (a, b) in bs.values().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert_eq!(bs.values()[0], 1.0);
}

#[test]
fn period_of_synthetic_periodic_spectrogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = Array2::from_shape_fn((8, 20), |_| rng.gen_range(0.1..5.0));
    let mag = Array2::from_shape_fn((160, 20), |(t, k)| base[[t % 8, k]]);
    let bs = beat_spectrum(mag.view()).unwrap();
    let v = bs.values();
    for m in [8, 16, 24, 32] {
        assert!(v[m] >= v[m - 1] && v[m] >= v[m + 1]);
    }
    assert_eq!(estimate_period(&bs, 2, 32).unwrap(), 8);
}

#[test]
fn repeating_model_is_segment_median() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mag = Array2::from_shape_fn((23, 6), |_| rng.gen_range(0.0..2.0));
    let p = 5;
    let m = repet_mask(mag.view(), p).unwrap();
    for t in 0..23 {
        for k in 0..6 {
            let med = median((t % p..23).step_by(p).map(|s| mag[[s, k]]).collect());
            assert_eq!(m.repeating_model[[t, k]], med);
            let w = med.min(mag[[t, k]]) / (mag[[t, k]] + 1e-10);
            assert_eq!(m.accompaniment.weights()[[t, k]], w);
        }
    }
}

#[test]
fn transient_bin_goes_to_vocal() {
    let mut mag = Array2::from_elem((9, 4), 2.0f64);
    mag[[4, 2]] = 20.0;
    let m = repet_mask(mag.view(), 3).unwrap();
    // median of {2, 20, 2} is 2, so the weight is 1 - 2/20
    assert!((m.vocal.weights()[[4, 2]] - 0.9).abs() < 1e-9);
    assert!(m.vocal.weights()[[4, 2]] >= 0.9 - 1e-9);
    assert!(m.vocal.weights()[[1, 2]] < 1e-9);
}

#[test]
fn masked_estimates_sum_to_reconstruction() {
    let c = synth_clip::<f64>(2, &SynthConfig::default()).unwrap();
    let cfg = SeparationConfig::default();
    let grid = frame_signal(&c.mixture, cfg.frame_ms, cfg.hop_ms).unwrap();
    let spec = stft(&c.mixture, &grid, cfg.n_fft).unwrap();
    let masks = repet_mask(spec.magnitude().view(), 100).unwrap();
    let v = istft(&spec.apply_gain(masks.vocal.weights()).unwrap()).unwrap();
    let a = istft(&spec.apply_gain(masks.accompaniment.weights()).unwrap()).unwrap();
    let full = istft(&spec).unwrap();
    for ((x, y), z) in v.samples().iter().zip(a.samples()).zip(full.samples()) {
        assert!((x + y - z).abs() < 1e-6);
    }

    let sep = separate(&c.mixture, &cfg).unwrap();
    for ((x, y), z) in sep.vocal.samples().iter().zip(sep.accompaniment.samples()).zip(full.samples()) {
        assert!((x + y - z).abs() < 1e-6);
    }
}

#[test]
fn estimates_do_not_gain_energy() {
    let cfg = SeparationConfig::default();
    for i in 0..3 {
        let c = synth_clip::<f64>(i, &SynthConfig::default()).unwrap();
        let sep = separate(&c.mixture, &cfg).unwrap();
        let mix = c.mixture.energy();
        assert!(sep.vocal.energy() + sep.accompaniment.energy() <= mix + 1e-6);
    }
}

#[test]
fn loop_only_clip_stays_in_accompaniment() {
    let x = tiled_loop(3, 10.0);
    let sep = separate(&clip(x.clone()), &SeparationConfig::default()).unwrap();
    assert_eq!(sep.period_frames, 100);
    let r = correlation(sep.accompaniment.samples(), &x);
    assert!(r > 0.99, "correlation {r}");
    assert!(sep.vocal.energy() < 1e-3 * sep.accompaniment.energy());
}

#[test]
fn vocal_estimate_tracks_the_voice() {
    let c = synth_clip::<f64>(5, &SynthConfig::default()).unwrap();
    let sep = separate(&c.mixture, &SeparationConfig::default()).unwrap();
    assert_eq!(sep.period_frames, 100);
    let before = correlation(c.mixture.samples(), c.vocal.samples());
    let after = correlation(sep.vocal.samples(), c.vocal.samples());
    assert!(after > before, "{after} <= {before}");
    let acc_after = correlation(sep.accompaniment.samples(), c.accompaniment.samples());
    let acc_before = correlation(c.mixture.samples(), c.accompaniment.samples());
    assert!(acc_after > acc_before);
}

#[test]
fn bursts_route_to_vocal() {
    for seed in 0..3 {
        let (acc, bursts) = loop_with_bursts(seed, 10.0);
        let share = transient_routing(&acc, &bursts);
        assert!(share >= 0.8, "seed {seed}: {share}");
    }
}

#[test]
fn short_clips_are_rejected() {
    let e = separate(&clip(vec![0.01; 1600]), &SeparationConfig::default()).unwrap_err();
    assert!(matches!(e, Error::TooShort(_)));
}

#[test]
fn zero_period_rejected() {
    assert!(repet_mask(Array2::<f64>::ones((4, 4)).view(), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_are_complementary(seed in 0u64..u64::MAX, n in 2usize..40, bins in 1usize..12, p in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mag = Array2::from_shape_fn((n, bins), |_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..100.0) });
        let m = repet_mask(mag.view(), p).unwrap();
        for (a, v) in m.accompaniment.weights().iter().zip(m.vocal.weights()) {
            prop_assert!((0.0..=1.0).contains(a) && (0.0..=1.0).contains(v));
            prop_assert_eq!(a + v, 1.0);
        }
    }

    #[test]
    fn periodic_magnitude_is_all_accompaniment(seed in 0u64..u64::MAX, p in 1usize..8, reps in 2usize..6, bins in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Array2::from_shape_fn((p, bins), |_| rng.gen_range(0.01..10.0));
        let mag = Array2::from_shape_fn((p * reps, bins), |(t, k)| base[[t % p, k]]);
        let m = repet_mask(mag.view(), p).unwrap();
        prop_assert!(m.vocal.weights().iter().all(|&w| w <= 1e-6));
    }
}
