use crate::error::{Error, Result};
use crate::eval::LabelTrack;
use crate::lrcn::PredictionTrack;
use crate::scalar::Real;

/// Sliding majority vote over binary labels with edge replication.
pub fn median_filter_labels(labels: &[u8], window: usize) -> Result<Vec<u8>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "median window must be odd and positive, got {window}"
        )));
    }
    let n = labels.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let half = window / 2;
    let at = |i: isize| labels[i.clamp(0, n as isize - 1) as usize] as usize;
    let mut ones: usize = (-(half as isize)..=half as isize).map(at).sum();
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        out.push((2 * ones > window) as u8);
        ones = ones + at(i + half as isize + 1) - at(i - half as isize);
    }
    Ok(out)
}

/// Thresholds the posteriors and median-filters the binary result.
pub fn median_filter<T: Real>(track: &PredictionTrack<T>, window: usize) -> Result<LabelTrack> {
    let raw = track.to_labels()?;
    LabelTrack::new(median_filter_labels(raw.labels(), window)?, *track.grid())
}
