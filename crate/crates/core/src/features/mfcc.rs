use ndarray::Array2;

use super::{FeatureKind, FeatureMatrix, FeatureSet, ENERGY_FLOOR};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::Spectrogram;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale, applied to a power
/// spectrum with `n_fft / 2 + 1` bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank<T> {
    weights: Array2<T>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|j| mel_to_hz(lo + (hi - lo) * j as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let weights = Array2::from_shape_fn((n_mels, n_bins), |(m, k)| {
            let f = k as f64 * bin_hz;
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let w = if f > left && f <= centre {
                (f - left) / (centre - left)
            } else if f > centre && f < right {
                (right - f) / (right - centre)
            } else {
                0.0
            };
            T::lit(w)
        });
        Self { weights }
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }
}

/// Orthonormal DCT-II basis rows `1..=n_coeffs` for `n` inputs.
fn dct_rows<T: Real>(n_coeffs: usize, n: usize) -> Array2<T> {
    let scale = (2.0 / n as f64).sqrt();
    Array2::from_shape_fn((n_coeffs, n), |(k, m)| {
        let k = k + 1;
        T::lit(scale * (std::f64::consts::PI * k as f64 * (m as f64 + 0.5) / n as f64).cos())
    })
}

/// Mel-frequency cepstral coefficients 1..=`n_coeffs`; the 0-th (energy)
/// coefficient is dropped.
pub fn mfcc<T: Real>(spec: &Spectrogram<T>, n_coeffs: usize, n_mels: usize) -> Result<FeatureMatrix<T>> {
    if n_mels < n_coeffs + 1 {
        return Err(Error::InvalidArgument(format!(
            "{n_mels} mel filters cannot yield {n_coeffs} coefficients plus the dropped energy term"
        )));
    }
    if spec.n_frames() == 0 {
        return Err(Error::InvalidArgument("empty spectrogram".into()));
    }
    let sr = spec.grid().sample_rate();
    let bank = MelFilterbank::<T>::new(n_mels, spec.n_fft(), sr, 0.0, sr as f64 / 2.0);
    let dct = dct_rows::<T>(n_coeffs, n_mels);
    let floor = T::lit(ENERGY_FLOOR);

    let power = spec.power();
    let mut log_mel = power.dot(&bank.weights.t());
    log_mel.mapv_inplace(|e| e.max(floor).ln());
    let values = log_mel.dot(&dct.t());
    FeatureMatrix::new(values, FeatureSet::single(FeatureKind::Mfcc), *spec.grid())
}
