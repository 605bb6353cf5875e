//! Frame-wise singing voice detection.
//!
//! The pipeline runs in four stages:
//!
//! ```text
//! mixture -> REPET separation -> MFCC / LPCC / PLP -> LRCN posteriors -> smoothing -> labels
//! ```
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below name the common instantiations.

pub mod audio;
pub mod error;
pub mod eval;
pub mod features;
pub mod lrcn;
pub mod pipeline;
pub mod scalar;
pub mod separation;
pub mod smoothing;
pub mod spectral;
pub mod synth;

pub use audio::{frame_signal, load_wav, write_wav, AudioClip, FrameGrid};
pub use error::{Error, Result};
pub use eval::{confusion_counts, kfold_split, load_labels, metrics, Counts, EvalReport, LabelTrack, Metrics};
pub use features::{blockify, concat_normalize, lpcc, mfcc, plp, FeatureMatrix, FeatureSet, FrameBlock, NormStats};
pub use lrcn::{
    lrcn_backward, lrcn_cell_step, lrcn_forward_block, predict_track, train_lrcn, LrcnConfig, LrcnParams,
    PredictionTrack, TrainConfig,
};
pub use scalar::Real;
pub use separation::{beat_spectrum, estimate_period, repet_mask, separate, BeatSpectrum, SoftMask};
pub use smoothing::{fit_hmm_gmm, median_filter, viterbi_decode, HmmGmmModel, SmoothingConfig};
pub use spectral::{istft, stft, Spectrogram};

pub type AudioClip64 = AudioClip<f64>;
pub type AudioClip32 = AudioClip<f32>;
pub type Spectrogram64 = Spectrogram<f64>;
pub type Spectrogram32 = Spectrogram<f32>;
pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type FeatureMatrix32 = FeatureMatrix<f32>;
pub type FrameBlock64 = FrameBlock<f64>;
pub type FrameBlock32 = FrameBlock<f32>;
pub type LrcnParams64 = LrcnParams<f64>;
pub type LrcnParams32 = LrcnParams<f32>;
pub type PredictionTrack64 = PredictionTrack<f64>;
pub type PredictionTrack32 = PredictionTrack<f32>;
pub type HmmGmmModel64 = HmmGmmModel<f64>;
pub type HmmGmmModel32 = HmmGmmModel<f32>;
