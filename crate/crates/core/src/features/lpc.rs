use ndarray::Array2;

use super::{FeatureKind, FeatureMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::Spectrogram;

/// Linear predictor in the convention `x[n] ≈ Σ_k a_k x[n-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lpc<T> {
    /// `a_1..=a_p`.
    pub coeffs: Vec<T>,
    pub reflection: Vec<T>,
    pub error: T,
    /// Set when the autocorrelation was singular and the coefficients were zeroed.
    pub degenerate: bool,
}

/// Levinson-Durbin recursion on autocorrelation lags `r[0..=order]`.
///
/// A zero-energy input yields all-zero coefficients with `degenerate` set.
/// If the prediction error collapses mid-recursion, higher orders stay zero.
pub fn levinson_durbin<T: Real>(r: &[T], order: usize) -> Result<Lpc<T>> {
    if r.len() < order + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    let zero = Lpc {
        coeffs: vec![T::zero(); order],
        reflection: vec![T::zero(); order],
        error: T::zero(),
        degenerate: true,
    };
    if !(r[0] > T::epsilon() * T::epsilon()) {
        return Ok(zero);
    }
    let mut a = vec![T::zero(); order + 1];
    let mut prev = vec![T::zero(); order + 1];
    let mut reflection = vec![T::zero(); order];
    let mut err = r[0];
    let floor = r[0] * T::epsilon();
    for m in 1..=order {
        let mut acc = r[m];
        for k in 1..m {
            acc = acc - a[k] * r[m - k];
        }
        let k_m = acc / err;
        prev[..m].copy_from_slice(&a[..m]);
        a[m] = k_m;
        for k in 1..m {
            a[k] = prev[k] - k_m * prev[m - k];
        }
        reflection[m - 1] = k_m;
        err = err * (T::one() - k_m * k_m);
        if !(err > floor) {
            break;
        }
    }
    Ok(Lpc {
        coeffs: a[1..].to_vec(),
        reflection,
        error: err,
        degenerate: false,
    })
}

/// Cepstrum `c_1..=c_n` of the all-pole model `1 / (1 - Σ a_k z^-k)`.
pub fn lpc_to_cepstrum<T: Real>(a: &[T], n_coeffs: usize) -> Vec<T> {
    let p = a.len();
    let mut c = vec![T::zero(); n_coeffs + 1];
    for n in 1..=n_coeffs {
        let mut acc = if n <= p { a[n - 1] } else { T::zero() };
        for k in n.saturating_sub(p).max(1)..n {
            let scale = T::from_usize_lossy(k) / T::from_usize_lossy(n);
            acc = acc + scale * c[k] * a[n - k - 1];
        }
        c[n] = acc;
    }
    c.remove(0);
    c
}

/// Autocorrelation lags `0..=max_lag` of the windowed frame, recovered from
/// its zero-padded power spectrum. Exact while `max_lag <= n_fft - frame_len`.
pub fn autocorrelation_from_power<T: Real>(power: &[T], n_fft: usize, max_lag: usize) -> Vec<T> {
    let half = n_fft / 2;
    let two = T::lit(2.0);
    let inv_n = T::one() / T::from_usize_lossy(n_fft);
    (0..=max_lag)
        .map(|k| {
            let nyq = if k % 2 == 0 { power[half] } else { -power[half] };
            let mut acc = power[0] + nyq;
            for (j, &p) in power.iter().enumerate().take(half).skip(1) {
                let phase = 2.0 * std::f64::consts::PI * ((j * k) % n_fft) as f64 / n_fft as f64;
                acc = acc + two * p * T::lit(phase.cos());
            }
            acc * inv_n
        })
        .collect()
}

/// Linear-prediction cepstral coefficients per frame.
pub fn lpcc<T: Real>(spec: &Spectrogram<T>, order: usize, n_coeffs: usize) -> Result<FeatureMatrix<T>> {
    let frame_len = spec.grid().frame_len();
    if order == 0 || frame_len <= order {
        return Err(Error::InvalidArgument(format!(
            "LPC order {order} must be positive and below the frame length {frame_len}"
        )));
    }
    if order > spec.n_fft() - frame_len {
        return Err(Error::InvalidArgument(format!(
            "LPC order {order} exceeds the alias-free lag range of n_fft {}",
            spec.n_fft()
        )));
    }
    if spec.n_frames() == 0 {
        return Err(Error::InvalidArgument("empty spectrogram".into()));
    }
    let power = spec.power();
    let mut values = Array2::zeros((spec.n_frames(), n_coeffs));
    let mut degenerate = Vec::new();
    for (i, row) in power.rows().into_iter().enumerate() {
        let row = row.to_vec();
        let r = autocorrelation_from_power(&row, spec.n_fft(), order);
        let lpc = levinson_durbin(&r, order)?;
        if lpc.degenerate {
            degenerate.push(i);
            continue;
        }
        for (dst, c) in values.row_mut(i).iter_mut().zip(lpc_to_cepstrum(&lpc.coeffs, n_coeffs)) {
            *dst = c;
        }
    }
    Ok(FeatureMatrix::new(values, FeatureSet::single(FeatureKind::Lpcc), *spec.grid())?
        .with_degenerate(degenerate))
}
