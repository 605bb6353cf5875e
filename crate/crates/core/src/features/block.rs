use ndarray::Array2;

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::eval::LabelTrack;
use crate::scalar::Real;

/// 600 ms of 20 ms hops.
pub const DEFAULT_BLOCK_LEN: usize = 29;
pub const DEFAULT_TRAIN_STRIDE: usize = 5;

/// A fixed-length run of consecutive feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock<T> {
    pub block: Array2<T>,
    pub label: Option<u8>,
    pub center_frame_index: usize,
}

impl<T: Real> FrameBlock<T> {
    pub fn new(block: Array2<T>, label: Option<u8>, center_frame_index: usize) -> Result<Self> {
        if let Some(l) = label {
            if l > 1 {
                return Err(Error::InvalidArgument(format!("block label {l} is not binary")));
            }
        }
        Ok(Self {
            block,
            label,
            center_frame_index,
        })
    }

    pub fn len(&self) -> usize {
        self.block.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.block.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.block.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgePadding {
    /// Only windows lying fully inside the matrix.
    None,
    /// One window centred on every `stride`-th frame, with out-of-range rows
    /// replaced by the nearest edge frame.
    Replicate,
}

/// Slides a `block_len`-frame window over `feat`. Block labels are the
/// ground-truth label of the centre frame.
pub fn blockify<T: Real>(
    feat: &FeatureMatrix<T>,
    labels: Option<&LabelTrack>,
    block_len: usize,
    stride: usize,
    padding: EdgePadding,
) -> Result<Vec<FrameBlock<T>>> {
    let n = feat.n_frames();
    if n == 0 {
        return Err(Error::InvalidArgument("empty feature matrix".into()));
    }
    if block_len == 0 || stride == 0 {
        return Err(Error::InvalidArgument("block length and stride must be positive".into()));
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {n} feature frames",
                l.len()
            )));
        }
    }
    let half = block_len / 2;
    let values = feat.values();
    let make = |center: usize, row_of: &dyn Fn(usize) -> usize| -> Result<FrameBlock<T>> {
        let block = Array2::from_shape_fn((block_len, feat.dim()), |(r, c)| values[[row_of(r), c]]);
        FrameBlock::new(block, labels.map(|l| l.labels()[center]), center)
    };
    match padding {
        EdgePadding::None => {
            if n < block_len {
                return Err(Error::TooShort(format!(
                    "{n} frames is shorter than a {block_len}-frame block"
                )));
            }
            (0..=n - block_len)
                .step_by(stride)
                .map(|start| make(start + half, &|r| start + r))
                .collect()
        }
        EdgePadding::Replicate => (0..n)
            .step_by(stride)
            .map(|center| {
                make(center, &|r| {
                    (center + r).saturating_sub(half).min(n - 1)
                })
            })
            .collect(),
    }
}
