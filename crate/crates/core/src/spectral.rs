//! Short-time Fourier transform and its weighted overlap-add inverse.

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, FrameGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default transform size: next power of two above a 640-sample frame.
pub const DEFAULT_N_FFT: usize = 1024;

/// Tolerance on the overlap-add sum of the analysis window.
pub const COLA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    /// Periodic (DFT-even) Hamming window.
    Hamming,
}

impl WindowKind {
    pub fn coefficients<T: Real>(self, len: usize) -> Vec<T> {
        match self {
            WindowKind::Hamming => (0..len)
                .map(|n| {
                    let phase = 2.0 * std::f64::consts::PI * n as f64 / len as f64;
                    T::lit(0.54 - 0.46 * phase.cos())
                })
                .collect(),
        }
    }
}

/// Checks that shifted copies of `window` at stride `hop` sum to a constant.
pub fn check_cola<T: Real>(window: &[T], hop: usize) -> Result<()> {
    if hop == 0 || hop > window.len() {
        return Err(Error::InvalidArgument(format!("invalid hop {hop}")));
    }
    let sums: Vec<f64> = (0..hop)
        .map(|n| window.iter().skip(n).step_by(hop).map(|w| w.as_f64()).sum())
        .collect();
    let max = sums.iter().cloned().fold(f64::MIN, f64::max);
    let min = sums.iter().cloned().fold(f64::MAX, f64::min);
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    if mean <= 0.0 || (max - min) / mean > COLA_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "window of length {} with hop {hop} violates constant overlap-add (spread {:.3e})",
            window.len(),
            if mean > 0.0 { (max - min) / mean } else { f64::INFINITY }
        )));
    }
    Ok(())
}

/// Complex spectrogram over a frame grid; rows are frames, columns are the
/// `n_fft / 2 + 1` non-negative frequency bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    bins: Array2<Complex<T>>,
    grid: FrameGrid,
    n_fft: usize,
    window: WindowKind,
    signal_len: usize,
}

impl<T: Real> Spectrogram<T> {
    pub fn bins(&self) -> &Array2<Complex<T>> {
        &self.bins
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self) -> usize {
        self.bins.nrows()
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    /// Length of the analysed signal, including any tail not covered by a frame.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn magnitude(&self) -> Array2<T> {
        self.bins.mapv(|c| c.norm())
    }

    pub fn power(&self) -> Array2<T> {
        self.bins.mapv(|c| c.norm_sqr())
    }

    /// Same grid and metadata with replaced bins.
    pub fn with_bins(&self, bins: Array2<Complex<T>>) -> Result<Self> {
        if bins.dim() != self.bins.dim() {
            return Err(Error::ShapeMismatch(format!(
                "bins {:?} vs spectrogram {:?}",
                bins.dim(),
                self.bins.dim()
            )));
        }
        Ok(Self {
            bins,
            ..self.clone()
        })
    }

    /// Element-wise product of the complex bins with a real gain matrix.
    pub fn apply_gain(&self, gain: &Array2<T>) -> Result<Self> {
        if gain.dim() != self.bins.dim() {
            return Err(Error::ShapeMismatch(format!(
                "gain {:?} vs spectrogram {:?}",
                gain.dim(),
                self.bins.dim()
            )));
        }
        let mut bins = self.bins.clone();
        bins.zip_mut_with(gain, |b, &g| *b = *b * g);
        self.with_bins(bins)
    }
}

/// Hamming-windowed FFT of every frame in `grid`, zero-padded to `n_fft`.
pub fn stft<T: Real>(clip: &AudioClip<T>, grid: &FrameGrid, n_fft: usize) -> Result<Spectrogram<T>> {
    let frame_len = grid.frame_len();
    if n_fft < frame_len {
        return Err(Error::InvalidArgument(format!(
            "n_fft {n_fft} is smaller than frame length {frame_len}"
        )));
    }
    if !n_fft.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("n_fft {n_fft} is not a power of two")));
    }
    if grid.covered_len() > clip.len() {
        return Err(Error::ShapeMismatch(format!(
            "grid covers {} samples but clip has {}",
            grid.covered_len(),
            clip.len()
        )));
    }
    let window = WindowKind::Hamming;
    let w = window.coefficients::<T>(frame_len);
    let fft = FftPlanner::<T>::new().plan_fft_forward(n_fft);
    let n_bins = n_fft / 2 + 1;
    let mut bins = Array2::from_elem((grid.n_frames(), n_bins), Complex::new(T::zero(), T::zero()));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    let samples = clip.samples();
    for (i, mut row) in bins.rows_mut().into_iter().enumerate() {
        let start = grid.frame_start(i);
        buf.iter_mut().for_each(|b| *b = Complex::new(T::zero(), T::zero()));
        for (n, (b, &wn)) in buf.iter_mut().zip(&w).enumerate() {
            *b = Complex::new(samples[start + n] * wn, T::zero());
        }
        fft.process(&mut buf);
        for (dst, src) in row.iter_mut().zip(&buf[..n_bins]) {
            *dst = *src;
        }
    }
    Ok(Spectrogram {
        bins,
        grid: *grid,
        n_fft,
        window,
        signal_len: clip.len(),
    })
}

/// Weighted overlap-add inverse, normalised by the summed squared window.
///
/// Samples past the last frame are returned as zeros so the output has the
/// original signal length.
pub fn istft<T: Real>(spec: &Spectrogram<T>) -> Result<AudioClip<T>> {
    let grid = spec.grid();
    let frame_len = grid.frame_len();
    let hop = grid.hop();
    let w = spec.window().coefficients::<T>(frame_len);
    check_cola(&w, hop)?;

    let n_fft = spec.n_fft();
    let n_bins = spec.n_bins();
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(n_fft);
    let out_len = spec.signal_len().max(grid.covered_len());
    let mut out = vec![T::zero(); out_len];
    let mut norm = vec![T::zero(); out_len];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    let scale = T::one() / T::from_usize_lossy(n_fft);

    for (i, row) in spec.bins().rows().into_iter().enumerate() {
        for k in 0..n_bins {
            buf[k] = row[k];
        }
        for k in 1..(n_fft - n_bins + 1) {
            buf[n_fft - k] = row[k].conj();
        }
        ifft.process(&mut buf);
        let start = grid.frame_start(i);
        for n in 0..frame_len {
            out[start + n] = out[start + n] + buf[n].re * scale * w[n];
            norm[start + n] = norm[start + n] + w[n] * w[n];
        }
    }
    let tiny = T::lit(1e-12);
    for (o, &d) in out.iter_mut().zip(&norm) {
        *o = if d > tiny { *o / d } else { T::zero() };
    }
    out.truncate(spec.signal_len());
    AudioClip::new(out, grid.sample_rate(), "istft")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::frame_signal;

    #[test]
    fn hamming_cola_at_half_overlap() {
        let w = WindowKind::Hamming.coefficients::<f64>(640);
        check_cola(&w, 320).unwrap();
        check_cola(&w, 160).unwrap();
        assert!(check_cola(&w, 640).is_err());
    }

    #[test]
    fn zero_clip_zero_spectrogram() {
        let clip = AudioClip::new(vec![0.0f64; 4000], 16_000, "z").unwrap();
        let grid = frame_signal(&clip, 40.0, 20.0).unwrap();
        let spec = stft(&clip, &grid, 1024).unwrap();
        assert!(spec.bins().iter().all(|c| c.norm() == 0.0));
        let back = istft(&spec).unwrap();
        assert!(back.samples().iter().all(|&s| s == 0.0));
        assert_eq!(back.len(), 4000);
    }

    #[test]
    fn rejects_small_fft() {
        let clip = AudioClip::new(vec![0.0f64; 4000], 16_000, "z").unwrap();
        let grid = frame_signal(&clip, 40.0, 20.0).unwrap();
        assert!(stft(&clip, &grid, 320).is_err());
        assert!(stft(&clip, &grid, 1000).is_err());
    }

    #[test]
    fn istft_rejects_non_cola_hop() {
        let clip = AudioClip::new(vec![0.1f64; 4000], 16_000, "z").unwrap();
        let grid = frame_signal(&clip, 40.0, 40.0).unwrap();
        let spec = stft(&clip, &grid, 1024).unwrap();
        assert!(istft(&spec).is_err());
    }
}
