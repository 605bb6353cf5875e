use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NormStats;
use crate::scalar::{sigmoid, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 500,
            l2: 0.0,
        }
    }
}

/// Logistic-loss linear classifier on min-max normalised frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline<T> {
    pub stats: NormStats<T>,
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> LinearBaseline<T> {
    pub fn zeros(stats: NormStats<T>) -> Self {
        let dim = stats.dim();
        Self {
            stats,
            weights: vec![T::zero(); dim],
            bias: T::zero(),
        }
    }

    fn normalised(&self, frames: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let mut x = frames.to_owned();
        self.stats.apply(&mut x)?;
        Ok(x)
    }

    pub fn predict_proba(&self, frames: ArrayView2<'_, T>) -> Result<Vec<T>> {
        let x = self.normalised(frames)?;
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let z = row.iter().zip(&self.weights).map(|(&a, &w)| a * w).sum::<T>() + self.bias;
                sigmoid(z)
            })
            .collect())
    }

    pub fn predict(&self, frames: ArrayView2<'_, T>) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(frames)?
            .into_iter()
            .map(|p| (p > T::lit(0.5)) as u8)
            .collect())
    }
}

/// Fits normalisation on `frames`, then full-batch gradient descent on the
/// mean logistic loss from zero weights.
pub fn baseline_linear<T: Real>(
    frames: ArrayView2<'_, T>,
    labels: &[u8],
    cfg: &BaselineConfig,
) -> Result<LinearBaseline<T>> {
    if frames.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frames for {} labels",
            frames.nrows(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InsufficientData("baseline needs both classes in training data".into()));
    }
    let mut model = LinearBaseline::zeros(NormStats::fit(frames)?);
    let x = model.normalised(frames)?;
    let n = T::from_usize_lossy(labels.len());
    let lr = T::lit(cfg.learning_rate);
    let l2 = T::lit(cfg.l2);
    let y: Vec<T> = labels.iter().map(|&l| T::lit(l as f64)).collect();
    for _ in 0..cfg.epochs {
        let mut gw = vec![T::zero(); model.weights.len()];
        let mut gb = T::zero();
        for (row, &yi) in x.rows().into_iter().zip(&y) {
            let z = row.iter().zip(&model.weights).map(|(&a, &w)| a * w).sum::<T>() + model.bias;
            let err = sigmoid(z) - yi;
            gb = gb + err;
            for (g, &a) in gw.iter_mut().zip(row.iter()) {
                *g = *g + err * a;
            }
        }
        for (w, g) in model.weights.iter_mut().zip(gw) {
            *w = *w - lr * (g / n + l2 * *w);
        }
        model.bias = model.bias - lr * gb / n;
    }
    Ok(model)
}
