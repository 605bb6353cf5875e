use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-column minimum and maximum learned on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> NormStats<T> {
    pub fn fit(values: ArrayView2<'_, T>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidArgument("cannot fit normalisation on zero rows".into()));
        }
        let min = values
            .columns()
            .into_iter()
            .map(|c| c.iter().cloned().fold(T::infinity(), T::min))
            .collect();
        let max = values
            .columns()
            .into_iter()
            .map(|c| c.iter().cloned().fold(T::neg_infinity(), T::max))
            .collect();
        Ok(Self { min, max })
    }

    /// Fits over the rows of several matrices at once.
    pub fn fit_many<'a>(parts: impl IntoIterator<Item = ArrayView2<'a, T>>) -> Result<Self> {
        let mut stats: Option<Self> = None;
        for part in parts {
            let s = Self::fit(part)?;
            stats = Some(match stats {
                None => s,
                Some(acc) => acc.merge(&s)?,
            });
        }
        stats.ok_or_else(|| Error::InvalidArgument("no data to fit normalisation".into()))
    }

    fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch("normalisation dims differ".into()));
        }
        Ok(Self {
            min: self.min.iter().zip(&other.min).map(|(&a, &b)| a.min(b)).collect(),
            max: self.max.iter().zip(&other.max).map(|(&a, &b)| a.max(b)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Affine min-max map; constant columns map to 0. Values outside the
    /// fitted range are not clipped.
    pub fn apply(&self, values: &mut Array2<T>) -> Result<()> {
        if values.ncols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} columns for {}-dim normalisation",
                values.ncols(),
                self.dim()
            )));
        }
        for (j, mut col) in values.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            let span = hi - lo;
            if span > T::zero() {
                col.mapv_inplace(|v| (v - lo) / span);
            } else {
                col.fill(T::zero());
            }
        }
        Ok(())
    }
}

/// Concatenates feature matrices column-wise in canonical set order, without scaling.
pub fn concat_features<T: Real>(parts: &[FeatureMatrix<T>]) -> Result<FeatureMatrix<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("no feature matrices to concatenate".into()))?;
    for p in parts {
        if p.n_frames() != first.n_frames() {
            return Err(Error::ShapeMismatch(format!(
                "frame count mismatch: {} has {} frames, {} has {}",
                first.tag(),
                first.n_frames(),
                p.tag(),
                p.n_frames()
            )));
        }
        if p.grid() != first.grid() {
            return Err(Error::ShapeMismatch("feature parts use different frame grids".into()));
        }
    }
    let mut ordered: Vec<&FeatureMatrix<T>> = parts.iter().collect();
    ordered.sort_by_key(|p| p.tag().kinds().to_vec());
    let tag = FeatureSet::new(ordered.iter().flat_map(|p| p.tag().kinds().iter().copied()))?;
    let views: Vec<_> = ordered.iter().map(|p| p.values().view()).collect();
    let values = concatenate(Axis(1), &views).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let mut degenerate: Vec<usize> = parts.iter().flat_map(|p| p.degenerate_frames().iter().copied()).collect();
    degenerate.sort_unstable();
    degenerate.dedup();
    Ok(FeatureMatrix::new(values, tag, *first.grid())?.with_degenerate(degenerate))
}

impl<T: Real> FeatureMatrix<T> {
    /// Copy of `self` scaled by `stats`.
    pub fn normalized(&self, stats: &NormStats<T>) -> Result<FeatureMatrix<T>> {
        let mut values = self.values().clone();
        stats.apply(&mut values)?;
        Ok(FeatureMatrix::new(values, self.tag().clone(), *self.grid())?
            .with_degenerate(self.degenerate_frames().to_vec()))
    }
}

/// Concatenates feature matrices column-wise in canonical set order and
/// min-max normalises the result, fitting stats when none are supplied.
pub fn concat_normalize<T: Real>(
    parts: &[FeatureMatrix<T>],
    stats: Option<&NormStats<T>>,
) -> Result<(FeatureMatrix<T>, NormStats<T>)> {
    let raw = concat_features(parts)?;
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormStats::fit(raw.values().view())?,
    };
    Ok((raw.normalized(&stats)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FrameGrid;
    use crate::features::FeatureKind;
    use ndarray::array;

    fn grid(n: usize) -> FrameGrid {
        FrameGrid::new(640, 320, n, 16_000).unwrap()
    }

    #[test]
    fn affine_and_constant_columns() {
        let m = FeatureMatrix::new(
            array![[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]],
            FeatureSet::single(FeatureKind::Mfcc),
            grid(3),
        )
        .unwrap();
        let (out, stats) = concat_normalize(&[m], None).unwrap();
        assert_eq!(out.values().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(out.values().column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(stats.min, vec![2.0, 5.0]);
    }

    #[test]
    fn test_data_not_clipped() {
        let stats = NormStats {
            min: vec![0.0],
            max: vec![2.0],
        };
        let m = FeatureMatrix::new(array![[4.0], [-2.0]], FeatureSet::single(FeatureKind::Plp), grid(2)).unwrap();
        let (out, _) = concat_normalize(&[m], Some(&stats)).unwrap();
        assert_eq!(out.values().column(0).to_vec(), vec![2.0, -1.0]);
    }

    #[test]
    fn order_and_mismatch() {
        let plp = FeatureMatrix::new(Array2::<f64>::zeros((4, 13)), FeatureSet::single(FeatureKind::Plp), grid(4)).unwrap();
        let mfcc = FeatureMatrix::new(Array2::<f64>::ones((4, 13)), FeatureSet::single(FeatureKind::Mfcc), grid(4)).unwrap();
        let (out, _) = concat_normalize(&[plp.clone(), mfcc], None).unwrap();
        assert_eq!(out.tag().to_string(), "mfcc_plp");
        assert_eq!(out.dim(), 26);
        assert_eq!(out.column_names()[13], "plp_1");

        let short = FeatureMatrix::new(Array2::<f64>::ones((3, 13)), FeatureSet::single(FeatureKind::Mfcc), grid(3)).unwrap();
        assert!(matches!(concat_normalize(&[plp, short], None), Err(Error::ShapeMismatch(_))));
    }
}
