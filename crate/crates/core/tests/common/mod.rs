#![allow(dead_code)]

pub mod dsp;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxdetect::audio::{frame_signal, AudioClip};
use voxdetect::separation::{repet_mask, SeparationConfig};
use voxdetect::spectral::stft;
use voxdetect::synth::accompaniment_loop;

pub const SR: u32 = 16_000;

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// A 2 s loop tiled over `seconds`.
pub fn tiled_loop(seed: u64, seconds: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loop_len = 2 * SR as usize;
    let pattern = accompaniment_loop(&mut rng, loop_len, SR);
    let n = (seconds * SR as f64) as usize;
    (0..n).map(|i| 0.3 * pattern[i % loop_len]).collect()
}

/// Exactly periodic loop plus short noise bursts whose RMS over each burst
/// sits `burst_db` above the loop RMS.
pub fn loop_with_bursts(seed: u64, burst_db: f64) -> (Vec<f64>, Vec<f64>) {
    let acc = tiled_loop(seed, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0b);
    let level = rms(&acc) * 10f64.powf(burst_db / 20.0);
    let len = (0.06 * SR as f64) as usize;
    let mut bursts = vec![0.0; acc.len()];
    for i in 0..8 {
        // one burst per 1.25 s slot, never at the same loop phase twice
        let start = (i as f64 * 1.25 + rng.gen_range(0.1..1.0)) * SR as f64;
        let start = start as usize;
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = level / rms(&raw);
        for (k, v) in raw.iter().enumerate() {
            let ramp = (k.min(len - 1 - k) as f64 / 32.0).min(1.0);
            bursts[start + k] = g * v * ramp;
        }
    }
    (acc, bursts)
}

/// Fraction of mixture energy in burst-dominated bins that the vocal mask
/// keeps, with the period known to be one loop.
pub fn transient_routing(acc: &[f64], bursts: &[f64]) -> f64 {
    let cfg = SeparationConfig::default();
    let mix: Vec<f64> = acc.iter().zip(bursts).map(|(a, b)| a + b).collect();
    let clip = |x: Vec<f64>| AudioClip::new(x, SR, "x").unwrap();
    let mix = clip(mix);
    let grid = frame_signal(&mix, cfg.frame_ms, cfg.hop_ms).unwrap();
    let mag = |c: &AudioClip<f64>| stft(c, &grid, cfg.n_fft).unwrap().magnitude();
    let (m_mix, m_acc, m_burst): (Array2<f64>, _, _) =
        (mag(&mix), mag(&clip(acc.to_vec())), mag(&clip(bursts.to_vec())));
    let period = 2 * SR as usize / grid.hop();
    let masks = repet_mask(m_mix.view(), period).unwrap();
    let (mut routed, mut total) = (0.0, 0.0);
    for ((idx, &b), &a) in m_burst.indexed_iter().zip(m_acc.iter()) {
        if b > a {
            let x2 = m_mix[idx] * m_mix[idx];
            total += x2;
            routed += masks.vocal.weights()[idx].powi(2) * x2;
        }
    }
    routed / total
}

use voxdetect::smoothing::{Gmm1d, HmmGmmModel};

fn stochastic(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let a = rng.gen_range(0.05..0.95);
    [a, 1.0 - a]
}

/// Random two-state model with `k` components per state.
pub fn random_hmm(rng: &mut ChaCha8Rng, k: usize) -> HmmGmmModel<f64> {
    let mut gmm = |centre: f64| {
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        Gmm1d {
            weights: w.iter().map(|v| v / s).collect(),
            means: (0..k).map(|_| centre + rng.gen_range(-0.3..0.3)).collect(),
            variances: (0..k).map(|_| rng.gen_range(0.005..0.1)).collect(),
        }
    };
    let emissions = [gmm(0.25), gmm(0.75)];
    HmmGmmModel {
        initial: stochastic(rng),
        transition: [stochastic(rng), stochastic(rng)],
        emissions,
    }
}

fn gmm_log_pdf(g: &Gmm1d<f64>, x: f64) -> f64 {
    let terms: Vec<f64> = g
        .weights
        .iter()
        .zip(&g.means)
        .zip(&g.variances)
        .map(|((w, m), v)| w.ln() - 0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v))
        .collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

pub fn path_score(m: &HmmGmmModel<f64>, path: &[u8], obs: &[f64]) -> f64 {
    let mut lp = m.initial[path[0] as usize].ln();
    for t in 0..path.len() {
        if t > 0 {
            lp += m.transition[path[t - 1] as usize][path[t] as usize].ln();
        }
        lp += gmm_log_pdf(&m.emissions[path[t] as usize], obs[t]);
    }
    lp
}

/// Best path by enumerating all `2^n` state sequences.
pub fn brute_force_path(m: &HmmGmmModel<f64>, obs: &[f64]) -> Vec<u8> {
    let n = obs.len();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for code in 0u32..(1 << n) {
        let path: Vec<u8> = (0..n).map(|t| ((code >> t) & 1) as u8).collect();
        let s = path_score(m, &path, obs);
        if s > best.0 {
            best = (s, path);
        }
    }
    best.1
}

/// Observations whose thresholded pattern is the bits of `code`.
pub fn pattern_observations(rng: &mut ChaCha8Rng, code: u32, n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            if (code >> t) & 1 == 1 {
                rng.gen_range(0.51..1.0)
            } else {
                rng.gen_range(0.0..0.5)
            }
        })
        .collect()
}

use voxdetect::pipeline::{Example, PipelineConfig};
use voxdetect::synth::{synth_corpus, SynthConfig};

/// A model and corpus small enough for a full cross-validation in seconds.
pub fn small_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    for (k, v) in [
        ("n_filters", "16"),
        ("hidden", "6"),
        ("dense", "8"),
        ("epochs", "2"),
        ("train_stride", "10"),
        ("folds", "3"),
        ("learning_rate", "0.01"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

pub fn small_corpus(n: usize) -> Vec<Example<f64>> {
    let sc = SynthConfig {
        n_clips: n,
        duration_s: 6.0,
        ..SynthConfig::default()
    };
    synth_corpus::<f64>(&sc).unwrap().iter().map(|c| c.to_example()).collect()
}
