use ndarray::Array2;

use super::lpc::{levinson_durbin, lpc_to_cepstrum};
use super::{FeatureKind, FeatureMatrix, FeatureSet, ENERGY_FLOOR};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::Spectrogram;

pub fn hz_to_bark(hz: f64) -> f64 {
    6.0 * (hz / 600.0).asinh()
}

pub fn bark_to_hz(bark: f64) -> f64 {
    600.0 * (bark / 6.0).sinh()
}

/// Critical-band masking curve as a function of the Bark offset from the band centre.
fn critical_band(dz: f64) -> f64 {
    if dz < -1.3 || dz > 2.5 {
        0.0
    } else if dz <= -0.5 {
        10f64.powf(2.5 * (dz + 0.5))
    } else if dz < 0.5 {
        1.0
    } else {
        10f64.powf(-(dz - 0.5))
    }
}

/// 40 dB equal-loudness curve at angular frequency `w`.
fn equal_loudness(w: f64) -> f64 {
    let w2 = w * w;
    (w2 + 56.8e6) * w2 * w2 / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9))
}

/// Intermediate results of the perceptual linear prediction chain for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlpStages<T> {
    pub bark_energies: Vec<T>,
    pub loudness: Vec<T>,
    pub compressed: Vec<T>,
    pub autocorrelation: Vec<T>,
    pub lpc: Vec<T>,
    pub cepstra: Vec<T>,
}

/// Precomputed Bark filterbank and loudness weights for a given transform size.
#[derive(Debug, Clone)]
pub struct PlpAnalyzer<T> {
    band_weights: Array2<T>,
    loudness: Vec<T>,
    order: usize,
    n_coeffs: usize,
}

impl<T: Real> PlpAnalyzer<T> {
    pub fn new(n_fft: usize, sample_rate: u32, order: usize, n_coeffs: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("PLP order must be positive".into()));
        }
        let n_bins = n_fft / 2 + 1;
        let nyquist_bark = hz_to_bark(sample_rate as f64 / 2.0);
        let n_bands = nyquist_bark.ceil() as usize + 1;
        let step = nyquist_bark / (n_bands - 1) as f64;
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let band_weights = Array2::from_shape_fn((n_bands, n_bins), |(m, k)| {
            T::lit(critical_band(hz_to_bark(k as f64 * bin_hz) - m as f64 * step))
        });
        let loudness = (0..n_bands)
            .map(|m| {
                let hz = bark_to_hz(m as f64 * step);
                T::lit(equal_loudness(2.0 * std::f64::consts::PI * hz))
            })
            .collect();
        Ok(Self {
            band_weights,
            loudness,
            order,
            n_coeffs,
        })
    }

    pub fn n_bands(&self) -> usize {
        self.band_weights.nrows()
    }

    /// Runs every stage on one power-spectrum frame.
    pub fn stages(&self, power: &[T]) -> Result<PlpStages<T>> {
        if power.len() != self.band_weights.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} bins for a {}-bin Bark filterbank",
                power.len(),
                self.band_weights.ncols()
            )));
        }
        let floor = T::lit(ENERGY_FLOOR);
        let bark_energies: Vec<T> = self
            .band_weights
            .rows()
            .into_iter()
            .map(|w| w.iter().zip(power).map(|(&a, &b)| a * b).sum())
            .collect();
        let loudness: Vec<T> = bark_energies
            .iter()
            .zip(&self.loudness)
            .map(|(&e, &l)| (e * l).max(floor))
            .collect();
        let m = loudness.len();
        let mut compressed: Vec<T> = loudness.iter().map(|&v| v.cbrt()).collect();
        // Edge bands sit outside the usable loudness range; copy their neighbours.
        compressed[0] = compressed[1];
        compressed[m - 1] = compressed[m - 2];

        let denom = T::from_usize_lossy(2 * (m - 1));
        let autocorrelation: Vec<T> = (0..=self.order)
            .map(|k| {
                let acc: T = compressed
                    .iter()
                    .enumerate()
                    .map(|(j, &y)| {
                        let weight = if j == 0 || j == m - 1 { 1.0 } else { 2.0 };
                        let phase = std::f64::consts::PI * (k * j) as f64 / (m - 1) as f64;
                        T::lit(weight * phase.cos()) * y
                    })
                    .sum();
                acc / denom
            })
            .collect();
        let lpc = levinson_durbin(&autocorrelation, self.order)?;
        let cepstra = lpc_to_cepstrum(&lpc.coeffs, self.n_coeffs);
        Ok(PlpStages {
            bark_energies,
            loudness,
            compressed,
            autocorrelation,
            lpc: lpc.coeffs,
            cepstra,
        })
    }
}

/// Perceptual linear prediction cepstra per frame.
pub fn plp<T: Real>(spec: &Spectrogram<T>, order: usize, n_coeffs: usize) -> Result<FeatureMatrix<T>> {
    if spec.n_frames() == 0 {
        return Err(Error::InvalidArgument("empty spectrogram".into()));
    }
    let analyzer = PlpAnalyzer::new(spec.n_fft(), spec.grid().sample_rate(), order, n_coeffs)?;
    let power = spec.power();
    let mut values = Array2::zeros((spec.n_frames(), n_coeffs));
    for (i, row) in power.rows().into_iter().enumerate() {
        let stages = analyzer.stages(&row.to_vec())?;
        for (dst, c) in values.row_mut(i).iter_mut().zip(stages.cepstra) {
            *dst = c;
        }
    }
    FeatureMatrix::new(values, FeatureSet::single(FeatureKind::Plp), *spec.grid())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_count_at_16k() {
        let a = PlpAnalyzer::<f64>::new(1024, 16_000, 12, 13).unwrap();
        assert_eq!(a.n_bands(), 21);
    }

    #[test]
    fn bark_inverse() {
        for hz in [0.0, 250.0, 4000.0] {
            assert!((bark_to_hz(hz_to_bark(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_flat_spectrum_same_cepstra() {
        let a = PlpAnalyzer::<f64>::new(1024, 16_000, 12, 13).unwrap();
        let flat = vec![1.0; 513];
        let scaled = vec![1000.0; 513];
        let c1 = a.stages(&flat).unwrap().cepstra;
        let c2 = a.stages(&scaled).unwrap().cepstra;
        for (x, y) in c1.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }
}
