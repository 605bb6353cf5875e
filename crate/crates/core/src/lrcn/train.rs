use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::backward_refs;
use super::cell::{forward_trace, InputProjection};
use super::params::{LrcnConfig, LrcnParams};
use crate::error::{Error, Result};
use crate::eval::{confusion_counts_raw, metrics};
use crate::features::FrameBlock;
use crate::scalar::{sigmoid, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation F1 improvement; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            patience: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,valid_f1\n");
        for e in &self.epochs {
            let f1 = e.valid_f1.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, f1));
        }
        s
    }
}

fn validation_f1<T: Real>(params: &LrcnParams<T>, valid: &[FrameBlock<T>]) -> Result<f64> {
    let proj = InputProjection::new(params);
    let pred: Vec<u8> = valid
        .par_iter()
        .map(|b| (sigmoid(forward_trace(params, &proj, b.block.view()).logit) > T::lit(0.5)) as u8)
        .collect();
    let truth: Vec<u8> = valid
        .iter()
        .map(|b| b.label.ok_or_else(|| Error::InvalidArgument("validation block without a label".into())))
        .collect::<Result<_>>()?;
    Ok(metrics(&confusion_counts_raw(&pred, &truth)?)?.f1)
}

/// Mini-batch gradient descent with momentum on binary cross-entropy.
///
/// Returns the parameters of the epoch with the best validation F1 (the
/// earliest on ties), or the final parameters when `valid` is empty.
pub fn train_lrcn<T: Real>(
    train: &[FrameBlock<T>],
    valid: &[FrameBlock<T>],
    model: &LrcnConfig,
    cfg: &TrainConfig,
) -> Result<(LrcnParams<T>, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let mut params = LrcnParams::<T>::init(model.clone(), cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_b10c);
    let mut velocity = vec![T::zero(); params.len()];
    let lr = T::lit(cfg.learning_rate);
    let mu = T::lit(cfg.momentum);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, LrcnParams<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&FrameBlock<T>> = batch_idx.iter().map(|&i| &train[i]).collect();
            let (loss, grad) = backward_refs(&batch, &params)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite loss or gradient at epoch {epoch}; lower the learning rate"
                )));
            }
            loss_sum += loss.as_f64() * batch.len() as f64;
            for ((p, v), &g) in params.as_mut_slice().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = mu * *v - lr * g;
                *p = *p + *v;
            }
        }
        let train_loss = loss_sum / train.len() as f64;
        let valid_f1 = if valid.is_empty() {
            None
        } else {
            Some(validation_f1(&params, valid)?)
        };
        log::info!("epoch {epoch}: loss {train_loss:.6} valid f1 {valid_f1:?}");
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            valid_f1,
        });
        if let Some(f1) = valid_f1 {
            if best.as_ref().map_or(true, |(b, _)| f1 > *b) {
                best = Some((f1, params.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
        }
    }
    Ok((best.map(|(_, p)| p).unwrap_or(params), history))
}
