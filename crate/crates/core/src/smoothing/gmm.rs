use serde::{Deserialize, Serialize};

use super::WEIGHT_PRUNE;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// One-dimensional Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm1d<T> {
    pub weights: Vec<T>,
    pub means: Vec<T>,
    pub variances: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmReport {
    /// Mean per-sample log-likelihood before each M-step, then at the final parameters.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// All observations (nearly) identical; only the variance floor keeps the fit proper.
    pub degenerate: bool,
    pub pruned: usize,
}

impl<T: Real> Gmm1d<T> {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    fn component_log_pdfs(&self, x: T) -> impl Iterator<Item = T> + Clone + '_ {
        let half_log_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let half = T::lit(0.5);
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(move |((&w, &m), &v)| {
                let d = x - m;
                w.ln() - half_log_2pi - half * v.ln() - half * d * d / v
            })
    }

    pub fn log_pdf(&self, x: T) -> T {
        log_sum_exp(self.component_log_pdfs(x))
    }

    pub fn mean_log_likelihood(&self, data: &[T]) -> f64 {
        data.iter().map(|&x| self.log_pdf(x).as_f64()).sum::<f64>() / data.len() as f64
    }

    /// Weight-averaged mean of the mixture.
    pub fn overall_mean(&self) -> T {
        self.weights.iter().zip(&self.means).map(|(&w, &m)| w * m).sum()
    }

    /// EM fit with quantile initialisation and a variance floor.
    ///
    /// Components whose weight ends below the pruning threshold are removed
    /// after convergence and the remaining weights renormalised.
    pub fn fit(
        data: &[T],
        n_components: usize,
        variance_floor: T,
        max_iter: usize,
        tolerance: f64,
    ) -> Result<(Self, EmReport)> {
        let n = data.len();
        if n_components == 0 {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if n < n_components {
            return Err(Error::InsufficientData(format!(
                "{n} samples for {n_components} mixture components"
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        let nf = T::from_usize_lossy(n);
        let mean = data.iter().cloned().sum::<T>() / nf;
        let var = data.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / nf;
        let mut report = EmReport {
            degenerate: var < variance_floor,
            ..Default::default()
        };

        let mut sorted = data.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let k = n_components;
        let means: Vec<T> = (0..k)
            .map(|j| {
                let q = (j as f64 + 0.5) / k as f64;
                sorted[((q * n as f64) as usize).min(n - 1)]
            })
            .collect();
        let init_var = (var / T::from_usize_lossy(k * k)).max(variance_floor);
        let mut gmm = Self {
            weights: vec![T::one() / T::from_usize_lossy(k); k],
            means,
            variances: vec![init_var; k],
        };

        let mut resp = vec![T::zero(); n * k];
        let mut prev_ll = f64::NEG_INFINITY;
        for iter in 0..max_iter {
            // E-step
            let mut ll = 0.0;
            for (i, &x) in data.iter().enumerate() {
                let row = &mut resp[i * k..(i + 1) * k];
                for (r, lp) in row.iter_mut().zip(gmm.component_log_pdfs(x)) {
                    *r = lp;
                }
                let norm = log_sum_exp(row.iter().cloned());
                ll += norm.as_f64();
                row.iter_mut().for_each(|r| *r = (*r - norm).exp());
            }
            ll /= n as f64;
            report.log_likelihood.push(ll);
            report.iterations = iter + 1;
            if (ll - prev_ll).abs() < tolerance {
                report.converged = true;
                break;
            }
            prev_ll = ll;

            // M-step
            for j in 0..k {
                let nk: T = (0..n).map(|i| resp[i * k + j]).sum();
                if !(nk > T::zero()) {
                    gmm.weights[j] = T::zero();
                    continue;
                }
                let mu = (0..n).map(|i| resp[i * k + j] * data[i]).sum::<T>() / nk;
                let v = (0..n)
                    .map(|i| {
                        let d = data[i] - mu;
                        resp[i * k + j] * d * d
                    })
                    .sum::<T>()
                    / nk;
                gmm.weights[j] = nk / nf;
                gmm.means[j] = mu;
                gmm.variances[j] = v.max(variance_floor);
            }
            let total: T = gmm.weights.iter().cloned().sum();
            gmm.weights.iter_mut().for_each(|w| *w = *w / total);
        }
        if !report.converged {
            report.log_likelihood.push(gmm.mean_log_likelihood(data));
        }

        let keep: Vec<usize> = (0..k).filter(|&j| gmm.weights[j] >= T::lit(WEIGHT_PRUNE)).collect();
        report.pruned = k - keep.len();
        if report.pruned > 0 {
            let total: T = keep.iter().map(|&j| gmm.weights[j]).sum();
            gmm = Self {
                weights: keep.iter().map(|&j| gmm.weights[j] / total).collect(),
                means: keep.iter().map(|&j| gmm.means[j]).collect(),
                variances: keep.iter().map(|&j| gmm.variances[j]).collect(),
            };
        }
        if report.degenerate {
            log::warn!("mixture fit on near-constant data; variance floor applied");
        }
        Ok((gmm, report))
    }
}
