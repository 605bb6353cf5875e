//! Ground-truth labels, confusion counting, frame-wise metrics and k-fold splits.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::FrameGrid;
use crate::error::{Error, Result};

/// Binary per-frame labels, 1 = singing voice present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTrack {
    labels: Vec<u8>,
    grid: FrameGrid,
}

impl LabelTrack {
    pub fn new(labels: Vec<u8>, grid: FrameGrid) -> Result<Self> {
        if labels.len() != grid.n_frames() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a grid of {} frames",
                labels.len(),
                grid.n_frames()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
        }
        Ok(Self { labels, grid })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Maximal runs of equal labels as `(first_frame, end_frame_exclusive, label)`.
    pub fn runs(&self) -> Vec<(usize, usize, u8)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.labels.len() {
            if i == self.labels.len() || self.labels[i] != self.labels[start] {
                runs.push((start, i, self.labels[start]));
                start = i;
            }
        }
        runs
    }

    /// Writes `start end label` segment lines that rasterise back to this track.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_label_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_label_text(&self) -> String {
        let g = &self.grid;
        let n = self.labels.len();
        let boundary = |i: usize| -> f64 {
            if i == 0 {
                0.0
            } else if i == n {
                g.covered_len() as f64 / g.sample_rate() as f64
            } else {
                0.5 * (g.center_seconds(i - 1) + g.center_seconds(i))
            }
        };
        let mut out = String::new();
        for (a, b, label) in self.runs() {
            let name = if label == 1 { "sing" } else { "nosing" };
            out.push_str(&format!("{:.6} {:.6} {name}\n", boundary(a), boundary(b)));
        }
        out
    }
}

/// Rasterises a segment label file onto `grid`: a frame is 1 iff its centre
/// lies in `[start, end)` of a `sing` segment.
pub fn load_labels(path: impl AsRef<Path>, grid: &FrameGrid) -> Result<LabelTrack> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, grid, path)
}

pub fn parse_labels(text: &str, grid: &FrameGrid, path: &Path) -> Result<LabelTrack> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut segments: Vec<(f64, f64)> = Vec::new();
    let mut prev_end = f64::NEG_INFINITY;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(line_no, format!("expected `start end label`, got {line:?}")));
        }
        let time = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite() && *t >= 0.0)
                .ok_or_else(|| parse_err(line_no, format!("bad time {s:?}")))
        };
        let (start, end) = (time(fields[0])?, time(fields[1])?);
        let sing = match fields[2] {
            "sing" | "1" => true,
            "nosing" | "0" => false,
            other => return Err(parse_err(line_no, format!("unknown label {other:?}"))),
        };
        if end < start {
            return Err(parse_err(line_no, format!("non-monotone segment {start} > {end}")));
        }
        if start < prev_end {
            return Err(parse_err(
                line_no,
                format!("overlapping segments: {start} starts before previous end {prev_end}"),
            ));
        }
        prev_end = end;
        if sing {
            segments.push((start, end));
        }
    }
    let labels = (0..grid.n_frames())
        .map(|i| {
            let t = grid.center_seconds(i);
            segments.iter().any(|&(s, e)| t >= s && t < e) as u8
        })
        .collect();
    LabelTrack::new(labels, *grid)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Frame-wise confusion counts with vocal as the positive class.
pub fn confusion_counts(pred: &LabelTrack, truth: &LabelTrack) -> Result<Counts> {
    confusion_counts_raw(pred.labels(), truth.labels())
}

pub fn confusion_counts_raw(pred: &[u8], truth: &[u8]) -> Result<Counts> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} frames, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut c = Counts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Names of metrics whose denominator was zero and were reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

pub fn metrics(counts: &Counts) -> Result<Metrics> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::InvalidArgument("zero total frames".into()));
    }
    let mut undefined = Vec::new();
    let mut ratio = |num: u64, den: u64, name: &str| {
        if den == 0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = (counts.tp + counts.tn) as f64 / total as f64;
    let precision = ratio(counts.tp, counts.tp + counts.fp, "precision");
    let recall = ratio(counts.tp, counts.tp + counts.fn_, "recall");
    if precision + recall == 0.0 {
        undefined.push("f1".into());
    }
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1: f_measure(precision, recall),
        undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileResult {
    pub id: String,
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pooled (frame-wise) counts and metrics over all files, plus per-file
/// results and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub per_file_mean: MeanMetrics,
    pub per_file: Vec<FileResult>,
}

impl EvalReport {
    /// Builds the report in the given file order.
    pub fn from_files(files: Vec<(String, Counts)>) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::InvalidArgument("no files to evaluate".into()));
        }
        let per_file = files
            .into_iter()
            .map(|(id, counts)| Ok(FileResult { metrics: metrics(&counts)?, id, counts }))
            .collect::<Result<Vec<_>>>()?;
        let counts = per_file.iter().fold(Counts::default(), |acc, f| acc + f.counts);
        let n = per_file.len() as f64;
        let mean = |get: fn(&Metrics) -> f64| per_file.iter().map(|f| get(&f.metrics)).sum::<f64>() / n;
        let per_file_mean = MeanMetrics {
            accuracy: mean(|m| m.accuracy),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        };
        Ok(Self {
            metrics: metrics(&counts)?,
            counts,
            per_file_mean,
            per_file,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "{}", self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Deterministic shuffled partition of whole items into `k` folds whose
/// sizes differ by at most one.
pub fn kfold_split<I: Clone>(items: &[I], k: usize, seed: u64) -> Result<Vec<Vec<I>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("fold count must be positive".into()));
    }
    if items.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} items cannot fill {k} folds",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (j, &i) in order.iter().enumerate() {
        folds[j % k].push(items[i].clone());
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> FrameGrid {
        FrameGrid::new(640, 320, n, 16_000).unwrap()
    }

    fn track(v: &[u8]) -> LabelTrack {
        LabelTrack::new(v.to_vec(), grid(v.len())).unwrap()
    }

    #[test]
    fn confusion_enumeration() {
        let c = confusion_counts(&track(&[1, 1, 0, 0]), &track(&[1, 0, 0, 1])).unwrap();
        assert_eq!(c, Counts { tp: 1, tn: 1, fp: 1, fn_: 1 });
        let m = metrics(&c).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));

        let c = confusion_counts(&track(&[0; 6]), &track(&[1; 6])).unwrap();
        assert_eq!(c.fn_, 6);
        assert!(confusion_counts(&track(&[0; 3]), &track(&[0; 4])).is_err());
    }

    #[test]
    fn zero_denominators_flagged() {
        let m = metrics(&Counts { tp: 0, tn: 5, fp: 0, fn_: 2 }).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.contains(&"precision".to_string()));
        assert!(metrics(&Counts::default()).is_err());
    }

    #[test]
    fn label_center_rule() {
        let g = FrameGrid::for_length(32_000, 640, 320, 16_000).unwrap();
        let t = parse_labels("0.0 1.0 sing\n", &g, Path::new("x")).unwrap();
        for i in 0..g.n_frames() {
            assert_eq!(t.labels()[i], (g.center_seconds(i) < 1.0) as u8);
        }
        let empty = parse_labels("", &g, Path::new("x")).unwrap();
        assert!(empty.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn label_errors() {
        let g = grid(100);
        let e = parse_labels("1.0 0.5 sing\n", &g, Path::new("x")).unwrap_err();
        assert!(e.to_string().contains("non-monotone"), "{e}");
        let e = parse_labels("0 1 sing\n0.5 2 nosing\n", &g, Path::new("x")).unwrap_err();
        assert!(e.to_string().contains("overlapping"), "{e}");
        let e = parse_labels("0 1 sing\nzzz\n", &g, Path::new("f.lab")).unwrap_err();
        assert!(e.to_string().starts_with("f.lab:2:"), "{e}");
    }

    #[test]
    fn label_text_round_trip() {
        let t = track(&[0, 0, 1, 1, 1, 0, 1]);
        let back = parse_labels(&t.to_label_text(), t.grid(), Path::new("x")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn folds() {
        let items: Vec<u32> = (0..10).collect();
        let f = kfold_split(&items, 5, 7).unwrap();
        assert!(f.iter().all(|fold| fold.len() == 2));
        assert_eq!(f, kfold_split(&items, 5, 7).unwrap());
        let mut all: Vec<u32> = f.concat();
        all.sort();
        assert_eq!(all, items);
        assert!(kfold_split(&items[..3], 5, 7).is_err());
        let uneven = kfold_split(&(0..11).collect::<Vec<_>>(), 5, 1).unwrap();
        let sizes: Vec<_> = uneven.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn f_measure_reference_rows() {
        assert!((f_measure(0.865, 0.920) - 0.892).abs() <= 0.001);
        assert!((f_measure(0.926, 0.934) - 0.930).abs() <= 0.001);
    }
}
