//! Repeating-pattern separation (REPET): the accompaniment is modelled as
//! the per-bin median of period-length spectrogram segments and the
//! non-repeating remainder is routed to the vocal estimate.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{frame_signal, AudioClip};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{istft, stft, DEFAULT_N_FFT};

/// Guard in the mask division.
pub const MASK_EPSILON: f64 = 1e-10;

/// Lag-domain self-similarity of a spectrogram, normalised so `values[0] == 1`
/// for any non-silent input.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSpectrum<T> {
    values: Vec<T>,
}

impl<T: Real> BeatSpectrum<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }
}

/// Beat spectrum of a magnitude spectrogram (frames × bins).
///
/// Each frequency row of the power spectrogram is autocorrelated over time
/// with the unbiased `1 / (n - lag)` normalisation, scaled to 1 at lag 0 and
/// averaged across rows. Lags run to `3n/4` so every value averages at least
/// a quarter of the frames.
pub fn beat_spectrum<T: Real>(mag: ArrayView2<'_, T>) -> Result<BeatSpectrum<T>> {
    let n = mag.nrows();
    if n < 2 {
        return Err(Error::TooShort(format!("beat spectrum needs 2 frames, got {n}")));
    }
    let max_lag = (3 * n / 4).max(1);
    let fft_len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_len];
    let mut acc = vec![T::zero(); max_lag + 1];
    let mut rows = 0usize;
    for col in mag.columns() {
        for (b, &m) in buf.iter_mut().zip(col.iter().chain(std::iter::repeat(&T::zero()))) {
            *b = Complex::new(m * m, T::zero());
        }
        fwd.process(&mut buf);
        buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), T::zero()));
        inv.process(&mut buf);
        let r0 = buf[0].re / T::from_usize_lossy(n);
        if !(r0 > T::zero()) {
            continue;
        }
        rows += 1;
        for (lag, a) in acc.iter_mut().enumerate() {
            let r = buf[lag].re / T::from_usize_lossy(n - lag);
            *a = *a + r / r0;
        }
    }
    if rows == 0 {
        return Ok(BeatSpectrum {
            values: vec![T::zero(); max_lag + 1],
        });
    }
    let b0 = acc[0];
    let values = acc
        .iter()
        .map(|&v| {
            let v = v / b0;
            // unbiased estimates can overshoot lag 0 on short, spiky rows
            if v > T::one() {
                T::one()
            } else {
                v
            }
        })
        .collect();
    Ok(BeatSpectrum { values })
}

/// Repeating period in frames within the inclusive lag range `[lo, hi]`.
///
/// Each candidate `p` is scored by the mean, over its integer multiples up
/// to `max_lag`, of how far the multiple stands above the mean of its
/// `±floor(3p/4)` neighbourhood (multiples that are not neighbourhood maxima
/// contribute 0). Ties go to the smaller lag.
pub fn estimate_period<T: Real>(bs: &BeatSpectrum<T>, lo: usize, hi: usize) -> Result<usize> {
    let max_lag = bs.max_lag();
    if lo == 0 || lo > hi || hi > max_lag {
        return Err(Error::InvalidArgument(format!(
            "period search range [{lo}, {hi}] is empty or outside [1, {max_lag}]"
        )));
    }
    let b = bs.values();
    let mut best = (lo, T::neg_infinity());
    for p in lo..=hi {
        let delta = 3 * p / 4;
        let mut sum = T::zero();
        let mut count = 0usize;
        let mut m = p;
        while m <= max_lag {
            count += 1;
            let (a, z) = ((m.saturating_sub(delta)).max(1), (m + delta).min(max_lag));
            let hood = &b[a..=z];
            let peak = hood.iter().cloned().fold(T::neg_infinity(), T::max);
            if b[m] >= peak {
                let mean = hood.iter().cloned().sum::<T>() / T::from_usize_lossy(hood.len());
                sum = sum + (b[m] - mean);
            }
            m += p;
        }
        let score = sum / T::from_usize_lossy(count);
        if score > best.1 {
            best = (p, score);
        }
    }
    Ok(best.0)
}

/// Real time-frequency weights, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask<T> {
    weights: Array2<T>,
}

impl<T: Real> SoftMask<T> {
    pub fn new(weights: Array2<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= T::zero() && *w <= T::one())) {
            return Err(Error::InvalidArgument("mask weights must lie in [0, 1]".into()));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    /// `1 - self`.
    pub fn complement(&self) -> Self {
        Self {
            weights: self.weights.mapv(|w| T::one() - w),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepetMasks<T> {
    pub accompaniment: SoftMask<T>,
    pub vocal: SoftMask<T>,
    /// Median repeating model, same shape as the input.
    pub repeating_model: Array2<T>,
}

fn median_in_place<T: Real>(v: &mut [T]) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
    }
}

/// Accompaniment and vocal masks for a magnitude spectrogram (frames × bins)
/// and a repeating period in frames.
pub fn repet_mask<T: Real>(mag: ArrayView2<'_, T>, period: usize) -> Result<RepetMasks<T>> {
    if period == 0 {
        return Err(Error::InvalidArgument("period must be at least one frame".into()));
    }
    let (n, bins) = mag.dim();
    let mut model = Array2::zeros((n, bins));
    let mut scratch = Vec::with_capacity(n / period + 1);
    for j in 0..period.min(n) {
        for k in 0..bins {
            scratch.clear();
            scratch.extend((j..n).step_by(period).map(|t| mag[[t, k]]));
            let med = median_in_place(&mut scratch);
            for t in (j..n).step_by(period) {
                model[[t, k]] = med;
            }
        }
    }
    let eps = T::lit(MASK_EPSILON);
    let acc = Array2::from_shape_fn((n, bins), |(t, k)| {
        let v = mag[[t, k]];
        let w = model[[t, k]].min(v);
        w / (v + eps)
    });
    let accompaniment = SoftMask::new(acc)?;
    Ok(RepetMasks {
        vocal: accompaniment.complement(),
        accompaniment,
        repeating_model: model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub min_period_s: f64,
    pub max_period_s: f64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 20.0,
            n_fft: DEFAULT_N_FFT,
            min_period_s: 0.8,
            max_period_s: 8.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Separation<T> {
    pub vocal: AudioClip<T>,
    pub accompaniment: AudioClip<T>,
    pub period_frames: usize,
}

/// Splits a mixture into vocal and accompaniment estimates. Masks are applied
/// to the complex bins, keeping the mixture phase.
pub fn separate<T: Real>(clip: &AudioClip<T>, cfg: &SeparationConfig) -> Result<Separation<T>> {
    let grid = frame_signal(clip, cfg.frame_ms, cfg.hop_ms)?;
    let frames_per_s = clip.sample_rate() as f64 / grid.hop() as f64;
    let lo = ((cfg.min_period_s * frames_per_s).round() as usize).max(1);
    // at least three repetitions must fit in the clip
    let hi = ((cfg.max_period_s * frames_per_s).round() as usize).min(grid.n_frames() / 3);
    if hi < lo {
        return Err(Error::TooShort(format!(
            "clip of {:.2} s is too short to estimate a repeating period of at least {} s",
            clip.duration_seconds(),
            cfg.min_period_s
        )));
    }
    let spec = stft(clip, &grid, cfg.n_fft)?;
    let mag = spec.magnitude();
    let bs = beat_spectrum(mag.view())?;
    let period = estimate_period(&bs, lo, hi.min(bs.max_lag()))?;
    log::debug!("{}: repeating period {period} frames", clip.source_id());
    let masks = repet_mask(mag.view(), period)?;
    let id = clip.source_id();
    let render = |mask: &SoftMask<T>, suffix: &str| -> Result<AudioClip<T>> {
        let out = istft(&spec.apply_gain(mask.weights())?)?;
        AudioClip::new(out.into_samples(), clip.sample_rate(), format!("{id}_{suffix}"))
    };
    Ok(Separation {
        vocal: render(&masks.vocal, "vocal")?,
        accompaniment: render(&masks.accompaniment, "accompaniment")?,
        period_frames: period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(n: usize, bins: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, bins), |(t, k)| {
            let phase = t % p;
            1.0 + ((phase * 7 + k * 3) % 11) as f64 + if phase == 0 { 20.0 } else { 0.0 }
        })
    }

    #[test]
    fn constant_beat_spectrum() {
        let bs = beat_spectrum(Array2::from_elem((40, 5), 2.0f64).view()).unwrap();
        assert!(bs.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let p = estimate_period(&bs, 2, 10).unwrap();
        assert_eq!(p, 2);
    }

    #[test]
    fn single_frame_rejected() {
        assert!(beat_spectrum(Array2::<f64>::ones((1, 4)).view()).is_err());
    }

    #[test]
    fn periodic_peaks_and_period() {
        let bs = beat_spectrum(periodic(200, 16, 8).view()).unwrap();
        let v = bs.values();
        for m in [8, 16, 24] {
            assert!(v[m] > v[m - 1] && v[m] > v[m + 1], "lag {m}");
        }
        assert_eq!(estimate_period(&bs, 2, 32).unwrap(), 8);
    }

    #[test]
    fn range_errors() {
        let bs = beat_spectrum(periodic(40, 4, 4).view()).unwrap();
        assert_eq!(bs.max_lag(), 30);
        assert!(estimate_period(&bs, 40, 50).is_err());
        assert!(estimate_period(&bs, 5, 4).is_err());
        assert!(estimate_period(&bs, 0, 4).is_err());
    }

    #[test]
    fn periodic_mixture_has_no_vocal() {
        let mag = periodic(64, 10, 8);
        let m = repet_mask(mag.view(), 8).unwrap();
        assert!(m.vocal.weights().iter().all(|&w| w <= 1e-6));
    }

    #[test]
    fn transient_routed_to_vocal() {
        // three segments of period 2; one bin 10x its median
        let mut mag = Array2::from_elem((6, 3), 1.0);
        mag[[2, 1]] = 10.0;
        let m = repet_mask(mag.view(), 2).unwrap();
        assert!(m.vocal.weights()[[2, 1]] >= 0.9);
        assert!(m.vocal.weights()[[0, 1]] <= 1e-9);
    }

    #[test]
    fn zero_spectrogram_masks() {
        let m = repet_mask(Array2::<f64>::zeros((10, 4)).view(), 3).unwrap();
        assert!(m.accompaniment.weights().iter().all(|&w| w == 0.0));
        assert!(m.vocal.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn short_clip_rejected() {
        let clip = AudioClip::new(vec![0.1f64; 1600], 16_000, "short").unwrap();
        let e = separate(&clip, &SeparationConfig::default()).unwrap_err();
        assert!(matches!(e, Error::TooShort(_)), "{e}");
    }
}
