//! Convolutional LSTM (LRCN) frame classifier and a linear baseline.

mod backward;
mod baseline;
mod cell;
mod checkpoint;
mod params;
mod train;

use rayon::prelude::*;

use crate::audio::FrameGrid;
use crate::error::{Error, Result};
use crate::eval::LabelTrack;
use crate::features::{blockify, EdgePadding, FeatureMatrix};
use crate::scalar::{sigmoid, Real};

pub use backward::{lrcn_backward, lrcn_loss};
pub use baseline::{baseline_linear, BaselineConfig, LinearBaseline};
pub use cell::{convolve, lrcn_cell_step, lrcn_forward_block, CellStep, InputProjection};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use params::{Gate, Layout, LrcnConfig, LrcnParams};
pub use train::{train_lrcn, EpochStats, TrainConfig, TrainHistory};

/// Per-frame voicing posteriors in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrack<T> {
    posteriors: Vec<T>,
    grid: FrameGrid,
    threshold: T,
}

impl<T: Real> PredictionTrack<T> {
    pub fn new(posteriors: Vec<T>, grid: FrameGrid) -> Result<Self> {
        if posteriors.len() != grid.n_frames() {
            return Err(Error::ShapeMismatch(format!(
                "{} posteriors for {} frames",
                posteriors.len(),
                grid.n_frames()
            )));
        }
        if posteriors.iter().any(|p| !(*p >= T::zero() && *p <= T::one())) {
            return Err(Error::InvalidArgument("posteriors must lie in [0, 1]".into()));
        }
        Ok(Self {
            posteriors,
            grid,
            threshold: T::lit(0.5),
        })
    }

    pub fn with_threshold(mut self, threshold: T) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn posteriors(&self) -> &[T] {
        &self.posteriors
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }

    /// Vocal where the posterior is strictly above the threshold.
    pub fn to_labels(&self) -> Result<LabelTrack> {
        LabelTrack::new(
            self.posteriors.iter().map(|&p| (p > self.threshold) as u8).collect(),
            self.grid,
        )
    }
}

/// One posterior per frame: every frame is the centre of an edge-replicated block.
pub fn predict_track<T: Real>(feat: &FeatureMatrix<T>, params: &LrcnParams<T>) -> Result<PredictionTrack<T>> {
    if feat.n_frames() == 0 {
        return Err(Error::InvalidArgument("empty feature matrix".into()));
    }
    if feat.dim() != params.config().feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "{}-dim features for a {}-dim model",
            feat.dim(),
            params.config().feature_dim
        )));
    }
    let blocks = blockify(feat, None, params.config().block_len, 1, EdgePadding::Replicate)?;
    let proj = InputProjection::new(params);
    let posteriors = blocks
        .par_iter()
        .map(|b| sigmoid(cell::forward_trace(params, &proj, b.block.view()).logit))
        .collect();
    PredictionTrack::new(posteriors, *feat.grid())
}
