//! Per-frame acoustic features: MFCC, LPCC and PLP, their concatenations,
//! min-max normalisation and fixed-length block packing.

mod block;
mod lpc;
mod mfcc;
mod normalize;
mod plp;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::audio::FrameGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use block::{blockify, EdgePadding, FrameBlock, DEFAULT_BLOCK_LEN, DEFAULT_TRAIN_STRIDE};
pub use lpc::{autocorrelation_from_power, levinson_durbin, lpc_to_cepstrum, lpcc, Lpc};
pub use mfcc::{hz_to_mel, mel_to_hz, mfcc, MelFilterbank};
pub use normalize::{concat_features, concat_normalize, NormStats};
pub use plp::{bark_to_hz, hz_to_bark, plp, PlpAnalyzer, PlpStages};

/// Floor applied to filterbank energies before the log / root compression.
pub const ENERGY_FLOOR: f64 = 1e-10;
/// Coefficients per feature kind in every Table-1 set.
pub const N_COEFFS: usize = 13;
pub const DEFAULT_N_MELS: usize = 26;
pub const DEFAULT_LPC_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Lpcc,
    Mfcc,
    Plp,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Lpcc => "lpcc",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Plp => "plp",
        }
    }
}

/// A feature set from the compared table: one to three kinds, always held
/// in canonical column order (lpcc, mfcc, plp).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureSet(Vec<FeatureKind>);

impl FeatureSet {
    pub const NAMES: [&'static str; 7] = [
        "mfcc",
        "lpcc",
        "plp",
        "mfcc_plp",
        "lpcc_plp",
        "lpcc_mfcc",
        "lpcc_mfcc_plp",
    ];

    pub fn new(kinds: impl IntoIterator<Item = FeatureKind>) -> Result<Self> {
        let mut kinds: Vec<_> = kinds.into_iter().collect();
        let n = kinds.len();
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() || kinds.len() != n {
            return Err(Error::InvalidArgument(
                "feature set needs one to three distinct kinds".into(),
            ));
        }
        Ok(Self(kinds))
    }

    pub fn single(kind: FeatureKind) -> Self {
        Self(vec![kind])
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        N_COEFFS * self.0.len()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|k| k.name()).collect();
        f.write_str(&names.join("_"))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !Self::NAMES.contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "unknown feature set {s:?}; expected one of {}",
                Self::NAMES.join(", ")
            )));
        }
        Self::new(s.split('_').map(|p| match p {
            "lpcc" => FeatureKind::Lpcc,
            "mfcc" => FeatureKind::Mfcc,
            _ => FeatureKind::Plp,
        }))
    }
}

impl TryFrom<String> for FeatureSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSet> for String {
    fn from(s: FeatureSet) -> String {
        s.to_string()
    }
}

/// Per-frame feature vectors: rows are frames, columns coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    values: Array2<T>,
    tag: FeatureSet,
    grid: FrameGrid,
    degenerate: Vec<usize>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(values: Array2<T>, tag: FeatureSet, grid: FrameGrid) -> Result<Self> {
        if values.nrows() != grid.n_frames() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for a grid of {} frames",
                values.nrows(),
                grid.n_frames()
            )));
        }
        if values.ncols() == 0 || values.ncols() % tag.kinds().len() != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} columns do not split evenly over {tag}",
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite {tag} feature value")));
        }
        Ok(Self {
            values,
            tag,
            grid,
            degenerate: Vec::new(),
        })
    }

    pub(crate) fn with_degenerate(mut self, frames: Vec<usize>) -> Self {
        self.degenerate = frames;
        self
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn tag(&self) -> &FeatureSet {
        &self.tag
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Frames whose analysis was degenerate (e.g. silent frames for LPC).
    pub fn degenerate_frames(&self) -> &[usize] {
        &self.degenerate
    }

    /// Column names, `<kind>_<index>` with 1-based indices.
    pub fn column_names(&self) -> Vec<String> {
        let per = self.dim() / self.tag.kinds().len();
        self.tag
            .kinds()
            .iter()
            .flat_map(|k| (1..=per).map(move |i| format!("{}_{i}", k.name())))
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "{}", self.column_names().join(","))?;
            for row in self.values.rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_names_round_trip() {
        for name in FeatureSet::NAMES {
            let set: FeatureSet = name.parse().unwrap();
            assert_eq!(set.to_string(), name);
        }
        assert!("plp_mfcc".parse::<FeatureSet>().is_err());
        assert_eq!("mfcc_plp".parse::<FeatureSet>().unwrap().dim(), 26);
        assert_eq!("lpcc_mfcc_plp".parse::<FeatureSet>().unwrap().dim(), 39);
    }

    #[test]
    fn canonical_order() {
        let s = FeatureSet::new([FeatureKind::Plp, FeatureKind::Lpcc]).unwrap();
        assert_eq!(s.to_string(), "lpcc_plp");
        assert!(FeatureSet::new([FeatureKind::Plp, FeatureKind::Plp]).is_err());
    }
}
