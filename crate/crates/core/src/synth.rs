//! Synthetic mixtures with known vocal activity.
//!
//! Accompaniment is a short loop tiled sample-exactly over the clip; the
//! voice is a harmonic tone with vibrato that glides between notes and is
//! gated on and off in segments of a few seconds.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::pipeline::Example;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_clips: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub loop_s: f64,
    /// Shortest and longest gated segment, seconds.
    pub segment_s: (f64, f64),
    /// Voice level relative to the accompaniment, dB of RMS.
    pub vocal_db: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clips: 50,
            duration_s: 10.0,
            sample_rate: 16_000,
            loop_s: 2.0,
            segment_s: (1.5, 3.0),
            vocal_db: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthClip<T> {
    pub id: String,
    pub mixture: AudioClip<T>,
    pub vocal: AudioClip<T>,
    pub accompaniment: AudioClip<T>,
    /// Voiced intervals `(start_s, end_s)`.
    pub voiced: Vec<(f64, f64)>,
}

impl<T: Real> SynthClip<T> {
    /// Label file text covering the whole clip.
    pub fn label_text(&self) -> String {
        let mut out = String::new();
        let mut t = 0.0;
        let end = self.mixture.duration_seconds();
        for &(a, b) in &self.voiced {
            if a > t {
                writeln!(out, "{t:.6} {a:.6} nosing").expect("string write");
            }
            writeln!(out, "{a:.6} {b:.6} sing").expect("string write");
            t = b;
        }
        if t < end {
            writeln!(out, "{t:.6} {end:.6} nosing").expect("string write");
        }
        out
    }

    pub fn to_example(&self) -> Example<T> {
        Example::new(self.id.clone(), self.mixture.clone(), self.label_text())
    }
}

fn envelope(t: f64, attack: f64, decay: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t < attack {
        t / attack
    } else {
        (-(t - attack) / decay).exp()
    }
}

/// One loop of drums and chords. Every event onset, pitch and noise sample is
/// drawn independently, so the loop is not self-similar at shorter lags.
pub fn accompaniment_loop(rng: &mut impl Rng, len: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let dur = len as f64 / sr;
    let mut out = vec![0.0; len];
    let n_hits = rng.gen_range(5..9);
    for _ in 0..n_hits {
        let onset = rng.gen_range(0.0..dur);
        let kick = rng.gen_bool(0.5);
        let freq = rng.gen_range(45.0..90.0);
        let amp = rng.gen_range(0.4..1.0);
        for (i, o) in out.iter_mut().enumerate() {
            // wrap so the loop boundary is seamless
            let mut t = i as f64 / sr - onset;
            if t < 0.0 {
                t += dur;
            }
            if kick {
                let e = envelope(t, 0.002, 0.08);
                if e > 1e-6 {
                    *o += amp * e * (TAU * freq * t * (1.0 + 2.0 * (-t / 0.03).exp())).sin();
                }
            }
        }
        if !kick {
            let start = (onset * sr) as usize;
            let n = (0.08 * sr) as usize;
            for k in 0..n {
                let e = envelope(k as f64 / sr, 0.001, 0.02);
                out[(start + k) % len] += 0.5 * amp * e * rng.gen_range(-1.0..1.0);
            }
        }
    }
    let n_chords = rng.gen_range(2..5);
    let mut cuts: Vec<f64> = (0..n_chords - 1).map(|_| rng.gen_range(0.1..dur - 0.1)).collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.insert(0, 0.0);
    cuts.push(dur);
    for w in cuts.windows(2) {
        let root = 55.0 * 2f64.powf(rng.gen_range(0..24) as f64 / 12.0);
        let notes = [root, root * 2f64.powf(4.0 / 12.0), root * 1.5];
        let (a, b) = ((w[0] * sr) as usize, (w[1] * sr) as usize);
        for &f in &notes {
            let phase = rng.gen_range(0.0..TAU);
            for (k, o) in out[a..b].iter_mut().enumerate() {
                let t = k as f64 / sr;
                let e = (t / 0.01).min(1.0) * (((b - a - k) as f64 / sr) / 0.01).min(1.0);
                let mut v = 0.0;
                for h in 1..=4 {
                    v += (TAU * f * h as f64 * t + phase * h as f64).sin() / (h * h) as f64;
                }
                *o += 0.25 * e * v;
            }
        }
    }
    out
}

/// Gated vibrato voice and its voiced intervals.
pub fn vocal_line(rng: &mut impl Rng, len: usize, sample_rate: u32, segment_s: (f64, f64)) -> (Vec<f64>, Vec<(f64, f64)>) {
    let sr = sample_rate as f64;
    let dur = len as f64 / sr;
    let mut voiced = Vec::new();
    let mut t = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(segment_s.0..segment_s.1) };
    while t < dur {
        let end = (t + rng.gen_range(segment_s.0..segment_s.1)).min(dur);
        if end - t > 0.2 {
            voiced.push((t, end));
        }
        t = end + rng.gen_range(segment_s.0..segment_s.1);
    }
    let mut out = vec![0.0; len];
    for &(a, b) in &voiced {
        let (i0, i1) = ((a * sr) as usize, ((b * sr) as usize).min(len));
        let rate = rng.gen_range(4.5..6.5);
        let depth = rng.gen_range(0.015..0.035);
        // note targets every 0.25-0.6 s, glided by a first-order lag
        let mut pitch = 130.0 * 2f64.powf(rng.gen_range(0.0..2.0));
        let mut target = pitch;
        let mut next_note = 0usize;
        let mut phase = 0.0;
        let mut vib_phase = rng.gen_range(0.0..TAU);
        for (k, o) in out[i0..i1].iter_mut().enumerate() {
            if k >= next_note {
                target = 130.0 * 2f64.powf(rng.gen_range(0.0..2.0));
                next_note = k + (rng.gen_range(0.25..0.6) * sr) as usize;
            }
            pitch += (target - pitch) * (1.0 / (0.04 * sr));
            vib_phase += TAU * rate / sr;
            let f0 = pitch * (1.0 + depth * vib_phase.sin());
            phase += TAU * f0 / sr;
            let tk = k as f64 / sr;
            let gate = (tk / 0.02).min(1.0) * (((i1 - i0 - k) as f64 / sr) / 0.02).min(1.0);
            let mut v = 0.0;
            for h in 1..=10 {
                if f0 * h as f64 >= sr / 2.0 {
                    break;
                }
                // formant-like tilt around 600 Hz and 2.5 kHz
                let fh = f0 * h as f64;
                let g = 1.0 / (1.0 + ((fh - 600.0) / 400.0).powi(2)) + 0.5 / (1.0 + ((fh - 2500.0) / 500.0).powi(2));
                v += g * (phase * h as f64).sin();
            }
            *o = gate * v;
        }
    }
    (out, voiced)
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Clip `index` of the corpus; clips are independent of each other and of `n_clips`.
pub fn synth_clip<T: Real>(index: usize, cfg: &SynthConfig) -> Result<SynthClip<T>> {
    let len = (cfg.duration_s * cfg.sample_rate as f64).round() as usize;
    let loop_len = (cfg.loop_s * cfg.sample_rate as f64).round() as usize;
    if loop_len == 0 || len < loop_len {
        return Err(Error::InvalidArgument("loop must be non-empty and no longer than the clip".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
    let pattern = accompaniment_loop(&mut rng, loop_len, cfg.sample_rate);
    let acc: Vec<f64> = (0..len).map(|i| pattern[i % loop_len]).collect();
    let (mut voice, voiced) = vocal_line(&mut rng, len, cfg.sample_rate, cfg.segment_s);
    let voiced_rms = {
        let sr = cfg.sample_rate as f64;
        let on: Vec<f64> = voiced
            .iter()
            .flat_map(|&(a, b)| voice[(a * sr) as usize..((b * sr) as usize).min(len)].to_vec())
            .collect();
        rms(&on)
    };
    if voiced_rms > 0.0 {
        let g = rms(&acc) * 10f64.powf(cfg.vocal_db / 20.0) / voiced_rms;
        voice.iter_mut().for_each(|v| *v *= g);
    }
    let peak = acc
        .iter()
        .zip(&voice)
        .map(|(a, v)| (a + v).abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    let scale = 0.8 / peak;
    let id = format!("synth_{index:03}");
    let to_clip = |x: Vec<f64>, suffix: &str| {
        AudioClip::new(
            x.into_iter().map(|v| T::lit(v * scale)).collect(),
            cfg.sample_rate,
            format!("{id}{suffix}"),
        )
    };
    let mixture: Vec<f64> = acc.iter().zip(&voice).map(|(a, v)| a + v).collect();
    Ok(SynthClip {
        mixture: to_clip(mixture, "")?,
        vocal: to_clip(voice, "_vocal")?,
        accompaniment: to_clip(acc, "_accompaniment")?,
        voiced,
        id,
    })
}

pub fn synth_corpus<T: Real>(cfg: &SynthConfig) -> Result<Vec<SynthClip<T>>> {
    (0..cfg.n_clips).map(|i| synth_clip(i, cfg)).collect()
}
