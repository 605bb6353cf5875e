//! Temporal smoothing of posterior tracks: binary median filtering and a
//! two-state HMM with Gaussian-mixture observations decoded by Viterbi.

mod gmm;
mod hmm;
mod median;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LabelTrack;
use crate::lrcn::PredictionTrack;
use crate::scalar::Real;

pub use gmm::{EmReport, Gmm1d};
pub use hmm::{fit_hmm_gmm, viterbi_decode, HmmFitReport, HmmGmmModel, NON_VOCAL, VOCAL};
pub use median::{median_filter, median_filter_labels};

pub const DEFAULT_MEDIAN_WINDOW: usize = 87;
pub const DEFAULT_COMPONENTS: usize = 45;
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-4;
pub const DEFAULT_EM_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_EM_MAX_ITER: usize = 200;
pub const WEIGHT_PRUNE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothingMethod {
    None,
    Median,
    Hmm,
}

impl fmt::Display for SmoothingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmoothingMethod::None => "none",
            SmoothingMethod::Median => "median",
            SmoothingMethod::Hmm => "hmm",
        })
    }
}

impl FromStr for SmoothingMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SmoothingMethod::None),
            "median" => Ok(SmoothingMethod::Median),
            "hmm" => Ok(SmoothingMethod::Hmm),
            _ => Err(Error::InvalidArgument(format!(
                "unknown smoothing method {s:?} (none, median, hmm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub method: SmoothingMethod,
    pub median_window: usize,
    pub n_components: usize,
    pub variance_floor: f64,
    pub em_max_iter: usize,
    pub em_tolerance: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            method: SmoothingMethod::Median,
            median_window: DEFAULT_MEDIAN_WINDOW,
            n_components: DEFAULT_COMPONENTS,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            em_max_iter: DEFAULT_EM_MAX_ITER,
            em_tolerance: DEFAULT_EM_TOLERANCE,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "median window must be odd and positive, got {}",
                self.median_window
            )));
        }
        if self.n_components == 0 || !(self.variance_floor > 0.0) || !(self.em_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("invalid HMM settings".into()));
        }
        Ok(())
    }
}

/// Applies the configured method. `model` is required for [`SmoothingMethod::Hmm`].
pub fn smooth<T: Real>(
    track: &PredictionTrack<T>,
    cfg: &SmoothingConfig,
    model: Option<&HmmGmmModel<T>>,
) -> Result<LabelTrack> {
    match cfg.method {
        SmoothingMethod::None => track.to_labels(),
        SmoothingMethod::Median => median_filter(track, cfg.median_window),
        SmoothingMethod::Hmm => {
            let model = model.ok_or_else(|| {
                Error::InvalidArgument("HMM smoothing needs a fitted model".into())
            })?;
            viterbi_decode(model, track)
        }
    }
}
