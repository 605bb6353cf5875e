//! End-to-end runs: configuration, per-clip preparation, training, inference
//! and k-fold experiments.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::audio::{frame_signal, ms_to_samples, AudioClip, FrameGrid, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::eval::{confusion_counts, kfold_split, parse_labels, EvalReport, LabelTrack};
use crate::features::{
    blockify, concat_features, lpcc, mfcc, plp, EdgePadding, FeatureKind, FeatureMatrix, FeatureSet, FrameBlock,
    NormStats, DEFAULT_LPC_ORDER, DEFAULT_N_MELS, DEFAULT_TRAIN_STRIDE, N_COEFFS,
};
use crate::lrcn::{
    decode_checkpoint, encode_checkpoint, predict_track, train_lrcn, LrcnConfig, LrcnParams, PredictionTrack,
    TrainConfig, TrainHistory,
};
use crate::scalar::Real;
use crate::separation::{separate, SeparationConfig};
use crate::smoothing::{fit_hmm_gmm, smooth, HmmGmmModel, SmoothingConfig, SmoothingMethod};
use crate::spectral::{stft, DEFAULT_N_FFT};

/// Every tunable of a run. Defaults are separation on, MFCC, LRCN and median smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub separation_enabled: bool,
    pub features: FeatureSet,
    pub sample_rate: u32,
    /// Feature framing; separation has its own in `separation`.
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub separation: SeparationConfig,
    pub n_mels: usize,
    pub lpc_order: usize,
    pub train_stride: usize,
    pub model: LrcnConfig,
    pub train: TrainConfig,
    /// Share of training files held out to pick the best epoch.
    pub valid_fraction: f64,
    pub threshold: f64,
    pub smoothing: SmoothingConfig,
    pub folds: usize,
}

/// Config keys in dump order, with a one-line description each.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("separation", "run repeating-pattern separation before feature extraction (true/false)"),
    ("features", "feature set: lpcc, mfcc, plp, lpcc_mfcc, lpcc_plp, mfcc_plp or lpcc_mfcc_plp"),
    ("sample_rate", "analysis sample rate in Hz; input is resampled to it"),
    ("frame_ms", "feature frame length in milliseconds"),
    ("hop_ms", "feature frame hop in milliseconds (equal to frame_ms for no overlap)"),
    ("n_fft", "feature FFT size (power of two, at least the frame length)"),
    ("repet_frame_ms", "separation frame length in milliseconds"),
    ("repet_hop_ms", "separation frame hop in milliseconds (must satisfy overlap-add)"),
    ("repet_n_fft", "separation FFT size"),
    ("min_period_s", "shortest repeating period searched, seconds"),
    ("max_period_s", "longest repeating period searched, seconds"),
    ("n_mels", "mel filters for MFCC"),
    ("lpc_order", "linear prediction order for LPCC and PLP"),
    ("block_len", "frames per classifier block"),
    ("train_stride", "hop between training blocks, frames"),
    ("n_filters", "convolution kernels"),
    ("kernel_width", "convolution kernel width"),
    ("hidden", "recurrent state size"),
    ("pool", "max-pool length over the final hidden state"),
    ("dense", "comma-separated tanh layer widths of the head (empty for none)"),
    ("learning_rate", "gradient step size"),
    ("momentum", "momentum coefficient"),
    ("epochs", "training epochs"),
    ("batch_size", "blocks per gradient step"),
    ("patience", "epochs without validation gain before stopping (0 disables)"),
    ("valid_fraction", "share of training files held out for model selection"),
    ("threshold", "posterior above which a frame is vocal"),
    ("smoothing", "none, median or hmm"),
    ("median_window", "median filter length in frames (odd)"),
    ("hmm_components", "Gaussian components per HMM state"),
    ("variance_floor", "lower bound on mixture variances"),
    ("em_max_iter", "EM iteration cap"),
    ("em_tolerance", "EM stopping threshold on mean log-likelihood gain"),
    ("folds", "cross-validation folds"),
    ("seed", "seed for every random choice"),
];

impl Default for PipelineConfig {
    fn default() -> Self {
        let features = FeatureSet::single(FeatureKind::Mfcc);
        Self {
            separation_enabled: true,
            model: LrcnConfig::new(features.dim()),
            features,
            sample_rate: CANONICAL_SAMPLE_RATE,
            frame_ms: 40.0,
            hop_ms: 20.0,
            n_fft: DEFAULT_N_FFT,
            separation: SeparationConfig::default(),
            n_mels: DEFAULT_N_MELS,
            lpc_order: DEFAULT_LPC_ORDER,
            train_stride: DEFAULT_TRAIN_STRIDE,
            train: TrainConfig::default(),
            valid_fraction: 0.1,
            threshold: 0.5,
            smoothing: SmoothingConfig::default(),
            folds: 5,
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("{key}={value}: {e}")))
}

impl PipelineConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "separation" => self.separation_enabled = parse_value(key, v)?,
            "features" => {
                self.features = parse_value(key, v)?;
                self.model.feature_dim = self.features.dim();
            }
            "sample_rate" => self.sample_rate = parse_value(key, v)?,
            "frame_ms" => self.frame_ms = parse_value(key, v)?,
            "hop_ms" => self.hop_ms = parse_value(key, v)?,
            "n_fft" => self.n_fft = parse_value(key, v)?,
            "repet_frame_ms" => self.separation.frame_ms = parse_value(key, v)?,
            "repet_hop_ms" => self.separation.hop_ms = parse_value(key, v)?,
            "repet_n_fft" => self.separation.n_fft = parse_value(key, v)?,
            "min_period_s" => self.separation.min_period_s = parse_value(key, v)?,
            "max_period_s" => self.separation.max_period_s = parse_value(key, v)?,
            "n_mels" => self.n_mels = parse_value(key, v)?,
            "lpc_order" => self.lpc_order = parse_value(key, v)?,
            "block_len" => self.model.block_len = parse_value(key, v)?,
            "train_stride" => self.train_stride = parse_value(key, v)?,
            "n_filters" => self.model.n_filters = parse_value(key, v)?,
            "kernel_width" => self.model.kernel_width = parse_value(key, v)?,
            "hidden" => self.model.hidden = parse_value(key, v)?,
            "pool" => self.model.pool = parse_value(key, v)?,
            "dense" => {
                self.model.dense = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            "learning_rate" => self.train.learning_rate = parse_value(key, v)?,
            "momentum" => self.train.momentum = parse_value(key, v)?,
            "epochs" => self.train.epochs = parse_value(key, v)?,
            "batch_size" => self.train.batch_size = parse_value(key, v)?,
            "patience" => self.train.patience = parse_value(key, v)?,
            "valid_fraction" => self.valid_fraction = parse_value(key, v)?,
            "threshold" => self.threshold = parse_value(key, v)?,
            "smoothing" => self.smoothing.method = parse_value(key, v)?,
            "median_window" => self.smoothing.median_window = parse_value(key, v)?,
            "hmm_components" => self.smoothing.n_components = parse_value(key, v)?,
            "variance_floor" => self.smoothing.variance_floor = parse_value(key, v)?,
            "em_max_iter" => self.smoothing.em_max_iter = parse_value(key, v)?,
            "em_tolerance" => self.smoothing.em_tolerance = parse_value(key, v)?,
            "folds" => self.folds = parse_value(key, v)?,
            "seed" => self.train.seed = parse_value(key, v)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Textual value of a key, in a form [`PipelineConfig::set`] reads back exactly.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "separation" => self.separation_enabled.to_string(),
            "features" => self.features.to_string(),
            "sample_rate" => self.sample_rate.to_string(),
            "frame_ms" => self.frame_ms.to_string(),
            "hop_ms" => self.hop_ms.to_string(),
            "n_fft" => self.n_fft.to_string(),
            "repet_frame_ms" => self.separation.frame_ms.to_string(),
            "repet_hop_ms" => self.separation.hop_ms.to_string(),
            "repet_n_fft" => self.separation.n_fft.to_string(),
            "min_period_s" => self.separation.min_period_s.to_string(),
            "max_period_s" => self.separation.max_period_s.to_string(),
            "n_mels" => self.n_mels.to_string(),
            "lpc_order" => self.lpc_order.to_string(),
            "block_len" => self.model.block_len.to_string(),
            "train_stride" => self.train_stride.to_string(),
            "n_filters" => self.model.n_filters.to_string(),
            "kernel_width" => self.model.kernel_width.to_string(),
            "hidden" => self.model.hidden.to_string(),
            "pool" => self.model.pool.to_string(),
            "dense" => self.model.dense.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
            "learning_rate" => self.train.learning_rate.to_string(),
            "momentum" => self.train.momentum.to_string(),
            "epochs" => self.train.epochs.to_string(),
            "batch_size" => self.train.batch_size.to_string(),
            "patience" => self.train.patience.to_string(),
            "valid_fraction" => self.valid_fraction.to_string(),
            "threshold" => self.threshold.to_string(),
            "smoothing" => self.smoothing.method.to_string(),
            "median_window" => self.smoothing.median_window.to_string(),
            "hmm_components" => self.smoothing.n_components.to_string(),
            "variance_floor" => self.smoothing.variance_floor.to_string(),
            "em_max_iter" => self.smoothing.em_max_iter.to_string(),
            "em_tolerance" => self.smoothing.em_tolerance.to_string(),
            "folds" => self.folds.to_string(),
            "seed" => self.train.seed.to_string(),
            _ => return None,
        })
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    /// All keys as `key=value` lines in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _) in CONFIG_KEYS {
            writeln!(out, "{k}={}", self.get(k).expect("listed key")).expect("string write");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        for (frame, hop) in [
            (self.frame_ms, self.hop_ms),
            (self.separation.frame_ms, self.separation.hop_ms),
        ] {
            if !(frame > 0.0) || !(hop > 0.0) || hop > frame {
                return bad(format!("need 0 < hop <= frame, got frame {frame} ms, hop {hop} ms"));
            }
        }
        if !(self.separation.min_period_s > 0.0) || self.separation.max_period_s < self.separation.min_period_s {
            return bad("need 0 < min_period_s <= max_period_s".into());
        }
        if self.train_stride == 0 || self.folds < 2 {
            return bad("train_stride must be positive and folds at least 2".into());
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return bad(format!("valid_fraction {} outside [0, 1)", self.valid_fraction));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.model.feature_dim != self.features.dim() {
            return bad("model feature_dim does not match the feature set".into());
        }
        self.model.validate()?;
        self.train.validate()?;
        self.smoothing.validate()
    }
}

/// One recording with its ground-truth label text.
#[derive(Debug, Clone)]
pub struct Example<T> {
    pub id: String,
    pub clip: AudioClip<T>,
    /// Contents of a label file (`start end sing|nosing` lines).
    pub labels: String,
    /// Where `labels` came from, for error messages.
    pub label_path: PathBuf,
}

impl<T: Real> Example<T> {
    pub fn new(id: impl Into<String>, clip: AudioClip<T>, labels: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            label_path: PathBuf::from(format!("{id}.lab")),
            id,
            clip,
            labels: labels.into(),
        }
    }

    pub fn load(id: impl Into<String>, wav: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        let labels = labels.as_ref();
        let text = std::fs::read_to_string(labels).map_err(|e| Error::io(labels, e))?;
        Ok(Self {
            id: id.into(),
            clip: crate::audio::load_wav(wav)?,
            labels: text,
            label_path: labels.to_path_buf(),
        })
    }
}

/// Raw (unnormalised) features and labels of one example.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub id: String,
    pub features: FeatureMatrix<T>,
    pub labels: LabelTrack,
}

/// Resamples to the analysis rate and, when enabled, replaces the mixture by
/// its vocal estimate.
pub fn prepare_clip<T: Real>(clip: &AudioClip<T>, cfg: &PipelineConfig) -> Result<AudioClip<T>> {
    let clip = if clip.sample_rate() == cfg.sample_rate {
        clip.clone()
    } else {
        clip.resample(cfg.sample_rate)?
    };
    if cfg.separation_enabled {
        Ok(separate(&clip, &cfg.separation)?.vocal)
    } else {
        Ok(clip)
    }
}

/// Frame grid the pipeline uses for `clip` once resampled to the analysis rate.
pub fn analysis_grid<T: Real>(clip: &AudioClip<T>, cfg: &PipelineConfig) -> Result<FrameGrid> {
    let frame_len = ms_to_samples(cfg.frame_ms, cfg.sample_rate);
    let hop = ms_to_samples(cfg.hop_ms, cfg.sample_rate);
    let n = if clip.sample_rate() == cfg.sample_rate {
        clip.len()
    } else {
        clip.resample(cfg.sample_rate)?.len()
    };
    FrameGrid::for_length(n, frame_len, hop, cfg.sample_rate)
}

/// Unnormalised feature matrix of an already prepared clip.
pub fn clip_features<T: Real>(clip: &AudioClip<T>, cfg: &PipelineConfig) -> Result<FeatureMatrix<T>> {
    let grid = frame_signal(clip, cfg.frame_ms, cfg.hop_ms)?;
    let spec = stft(clip, &grid, cfg.n_fft)?;
    let parts = cfg
        .features
        .kinds()
        .iter()
        .map(|kind| match kind {
            FeatureKind::Lpcc => lpcc(&spec, cfg.lpc_order, N_COEFFS),
            FeatureKind::Mfcc => mfcc(&spec, N_COEFFS, cfg.n_mels),
            FeatureKind::Plp => plp(&spec, cfg.lpc_order, N_COEFFS),
        })
        .collect::<Result<Vec<_>>>()?;
    concat_features(&parts)
}

/// Features of a raw recording: [`prepare_clip`] then [`clip_features`].
pub fn extract_features<T: Real>(clip: &AudioClip<T>, cfg: &PipelineConfig) -> Result<FeatureMatrix<T>> {
    clip_features(&prepare_clip(clip, cfg)?, cfg)
}

pub fn prepare_example<T: Real>(ex: &Example<T>, cfg: &PipelineConfig) -> Result<Prepared<T>> {
    let features = extract_features(&ex.clip, cfg)?;
    let labels = parse_labels(&ex.labels, features.grid(), &ex.label_path)?;
    Ok(Prepared {
        id: ex.id.clone(),
        features,
        labels,
    })
}

/// [`prepare_example`] over all examples in parallel; output order follows input order.
pub fn prepare_examples<T: Real>(examples: &[Example<T>], cfg: &PipelineConfig) -> Result<Vec<Prepared<T>>> {
    examples.par_iter().map(|ex| prepare_example(ex, cfg)).collect()
}

/// A trained classifier with everything needed to score new features.
#[derive(Debug, Clone)]
pub struct TrainedModel<T> {
    pub config: PipelineConfig,
    pub params: LrcnParams<T>,
    pub stats: NormStats<T>,
    pub hmm: Option<HmmGmmModel<T>>,
    pub history: TrainHistory,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct ModelExtra<T> {
    pipeline: PipelineConfig,
    norm: NormStats<T>,
    hmm: Option<HmmGmmModel<T>>,
    history: TrainHistory,
}

fn training_blocks<T: Real>(
    files: &[&Prepared<T>],
    stats: &NormStats<T>,
    cfg: &PipelineConfig,
    stride: usize,
) -> Result<Vec<FrameBlock<T>>> {
    let per_file = files
        .par_iter()
        .map(|p| {
            let feat = p.features.normalized(stats)?;
            blockify(&feat, Some(&p.labels), cfg.model.block_len, stride, EdgePadding::Replicate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_file.into_iter().flatten().collect())
}

/// Fits normalisation, the LRCN and (for HMM smoothing) the HMM on `files`.
///
/// The last `valid_fraction` of the files are held out for epoch selection.
pub fn train_model<T: Real>(files: &[&Prepared<T>], cfg: &PipelineConfig) -> Result<TrainedModel<T>> {
    cfg.validate()?;
    if files.is_empty() {
        return Err(Error::InsufficientData("no training files".into()));
    }
    let n_valid = if files.len() > 1 {
        ((files.len() as f64 * cfg.valid_fraction).round() as usize).min(files.len() - 1)
    } else {
        0
    };
    let (fit, valid) = files.split_at(files.len() - n_valid);
    let stats = NormStats::fit_many(fit.iter().map(|p| p.features.values().view()))?;
    let train_blocks = training_blocks(fit, &stats, cfg, cfg.train_stride)?;
    let valid_blocks = training_blocks(valid, &stats, cfg, 1)?;
    log::info!(
        "training on {} blocks from {} files, validating on {} blocks",
        train_blocks.len(),
        fit.len(),
        valid_blocks.len()
    );
    let (params, history) = train_lrcn(&train_blocks, &valid_blocks, &cfg.model, &cfg.train)?;
    let mut model = TrainedModel {
        config: cfg.clone(),
        params,
        stats,
        hmm: None,
        history,
    };
    if cfg.smoothing.method == SmoothingMethod::Hmm {
        let tracks = fit
            .par_iter()
            .map(|p| model.posteriors(&p.features))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<LabelTrack> = fit.iter().map(|p| p.labels.clone()).collect();
        let (hmm, report) = fit_hmm_gmm(&tracks, &labels, &cfg.smoothing)?;
        if report.degenerate() {
            log::warn!("HMM emission fit hit the variance floor");
        }
        model.hmm = Some(hmm);
    }
    Ok(model)
}

impl<T: Real> TrainedModel<T> {
    /// Posterior track of raw (unnormalised) features.
    pub fn posteriors(&self, raw: &FeatureMatrix<T>) -> Result<PredictionTrack<T>> {
        if raw.tag() != &self.config.features {
            return Err(Error::ShapeMismatch(format!(
                "features {} for a model trained on {}",
                raw.tag(),
                self.config.features
            )));
        }
        let track = predict_track(&raw.normalized(&self.stats)?, &self.params)?;
        Ok(track.with_threshold(T::lit(self.config.threshold)))
    }

    /// Posteriors and smoothed labels of raw features.
    pub fn predict(&self, raw: &FeatureMatrix<T>) -> Result<(PredictionTrack<T>, LabelTrack)> {
        let track = self.posteriors(raw)?;
        let labels = smooth(&track, &self.config.smoothing, self.hmm.as_ref())?;
        Ok((track, labels))
    }
}

impl<T: Real + Serialize + DeserializeOwned> TrainedModel<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let extra = ModelExtra {
            pipeline: self.config.clone(),
            norm: self.stats.clone(),
            hmm: self.hmm.clone(),
            history: self.history.clone(),
        };
        let extra = serde_json::to_value(extra).expect("model metadata serialises");
        encode_checkpoint(&self.params, Some(&self.config.train), extra)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (params, meta) = decode_checkpoint::<T>(bytes)?;
        let extra: ModelExtra<T> = serde_json::from_value(meta.extra)
            .map_err(|e| Error::Checkpoint(format!("missing pipeline metadata: {e}")))?;
        if extra.pipeline.model != *params.config() {
            return Err(Error::Checkpoint("pipeline config disagrees with the stored model shape".into()));
        }
        if extra.norm.dim() != params.config().feature_dim {
            return Err(Error::Checkpoint("normalisation stats do not match the feature dimension".into()));
        }
        Ok(Self {
            config: extra.pipeline,
            params,
            stats: extra.norm,
            hmm: extra.hmm,
            history: extra.history,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Held-out predictions for one file of an experiment.
#[derive(Debug, Clone)]
pub struct FileOutcome<T> {
    pub id: String,
    pub fold: usize,
    pub track: PredictionTrack<T>,
    pub smoothed: LabelTrack,
    pub truth: LabelTrack,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T> {
    pub report: EvalReport,
    /// In input order.
    pub files: Vec<FileOutcome<T>>,
    /// Training history per fold.
    pub histories: Vec<TrainHistory>,
}

/// K-fold cross-validation: each fold is scored by a model trained on the others.
pub fn run_experiment<T: Real>(examples: &[Example<T>], cfg: &PipelineConfig) -> Result<ExperimentOutcome<T>> {
    cfg.validate()?;
    let prepared = prepare_examples(examples, cfg)?;
    run_prepared(&prepared, cfg)
}

/// [`run_experiment`] on already prepared examples.
pub fn run_prepared<T: Real>(prepared: &[Prepared<T>], cfg: &PipelineConfig) -> Result<ExperimentOutcome<T>> {
    cfg.validate()?;
    let indices: Vec<usize> = (0..prepared.len()).collect();
    let folds = kfold_split(&indices, cfg.folds, cfg.seed())?;
    let mut outcomes: Vec<Option<FileOutcome<T>>> = vec![None; prepared.len()];
    let mut histories = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<&Prepared<T>> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, fold)| fold.iter().map(|&i| &prepared[i]))
            .collect();
        let mut fold_cfg = cfg.clone();
        fold_cfg.train.seed = cfg.seed().wrapping_add(f as u64);
        log::info!("fold {}/{}: {} train, {} test files", f + 1, folds.len(), train.len(), test.len());
        let model = train_model(&train, &fold_cfg)?;
        let scored = test
            .par_iter()
            .map(|&i| {
                let p = &prepared[i];
                let (track, smoothed) = model.predict(&p.features)?;
                Ok((
                    i,
                    FileOutcome {
                        id: p.id.clone(),
                        fold: f,
                        track,
                        smoothed,
                        truth: p.labels.clone(),
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, o) in scored {
            outcomes[i] = Some(o);
        }
        histories.push(model.history);
    }
    let files: Vec<FileOutcome<T>> = outcomes.into_iter().map(|o| o.expect("every file is tested once")).collect();
    let report = EvalReport::from_files(
        files
            .iter()
            .map(|o| Ok((o.id.clone(), confusion_counts(&o.smoothed, &o.truth)?)))
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(ExperimentOutcome {
        report,
        files,
        histories,
    })
}

/// `frame_time,posterior,smoothed_label` rows, one per frame.
pub fn posterior_csv<T: Real>(track: &PredictionTrack<T>, smoothed: &LabelTrack) -> Result<String> {
    if track.len() != smoothed.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} posteriors for {} labels",
            track.len(),
            smoothed.len()
        )));
    }
    let mut out = String::from("frame_time,posterior,smoothed_label\n");
    for (i, (p, l)) in track.posteriors().iter().zip(smoothed.labels()).enumerate() {
        writeln!(out, "{},{},{}", track.grid().center_seconds(i), p, l).expect("string write");
    }
    Ok(out)
}

pub fn write_posterior_csv<T: Real>(track: &PredictionTrack<T>, smoothed: &LabelTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = posterior_csv(track, smoothed)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
