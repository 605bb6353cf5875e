use serde::{Deserialize, Serialize};

use super::gmm::{EmReport, Gmm1d};
use super::SmoothingConfig;
use crate::error::{Error, Result};
use crate::eval::LabelTrack;
use crate::lrcn::PredictionTrack;
use crate::scalar::Real;

pub const NON_VOCAL: usize = 0;
pub const VOCAL: usize = 1;

/// Two-state HMM over classifier posteriors with per-state 1-D mixture emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmGmmModel<T> {
    pub initial: [T; 2],
    /// `transition[from][to]`.
    pub transition: [[T; 2]; 2],
    pub emissions: [Gmm1d<T>; 2],
}

#[derive(Debug, Clone, Default)]
pub struct HmmFitReport {
    pub em: [EmReport; 2],
}

impl HmmFitReport {
    pub fn degenerate(&self) -> bool {
        self.em.iter().any(|r| r.degenerate)
    }
}

fn normalise_row<T: Real>(counts: [u64; 2]) -> [T; 2] {
    let total = counts[0] + counts[1];
    if total == 0 {
        [T::lit(0.5); 2]
    } else {
        let t = T::lit(total as f64);
        [T::lit(counts[0] as f64) / t, T::lit(counts[1] as f64) / t]
    }
}

/// Initial and transition probabilities from label counts; per-state
/// emission mixtures by EM on the posteriors of frames in that state.
pub fn fit_hmm_gmm<T: Real>(
    tracks: &[PredictionTrack<T>],
    labels: &[LabelTrack],
    cfg: &SmoothingConfig,
) -> Result<(HmmGmmModel<T>, HmmFitReport)> {
    cfg.validate()?;
    if tracks.len() != labels.len() || tracks.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} posterior tracks for {} label tracks",
            tracks.len(),
            labels.len()
        )));
    }
    let mut first = [0u64; 2];
    let mut trans = [[0u64; 2]; 2];
    let mut obs: [Vec<T>; 2] = [Vec::new(), Vec::new()];
    for (track, lab) in tracks.iter().zip(labels) {
        if track.len() != lab.len() {
            return Err(Error::ShapeMismatch(format!(
                "posterior track of {} frames vs {} labels",
                track.len(),
                lab.len()
            )));
        }
        let l = lab.labels();
        if let Some(&s) = l.first() {
            first[s as usize] += 1;
        }
        for w in l.windows(2) {
            trans[w[0] as usize][w[1] as usize] += 1;
        }
        for (&p, &s) in track.posteriors().iter().zip(l) {
            obs[s as usize].push(p);
        }
    }
    for (state, o) in obs.iter().enumerate() {
        if o.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no frames labelled {}",
                if state == VOCAL { "vocal" } else { "non-vocal" }
            )));
        }
        if o.len() < cfg.n_components {
            return Err(Error::InsufficientData(format!(
                "state {state} has {} frames for {} mixture components",
                o.len(),
                cfg.n_components
            )));
        }
    }
    let floor = T::lit(cfg.variance_floor);
    let (g0, r0) = Gmm1d::fit(&obs[0], cfg.n_components, floor, cfg.em_max_iter, cfg.em_tolerance)?;
    let (g1, r1) = Gmm1d::fit(&obs[1], cfg.n_components, floor, cfg.em_max_iter, cfg.em_tolerance)?;
    let model = HmmGmmModel {
        initial: normalise_row(first),
        transition: [normalise_row(trans[0]), normalise_row(trans[1])],
        emissions: [g0, g1],
    };
    Ok((model, HmmFitReport { em: [r0, r1] }))
}

impl<T: Real> HmmGmmModel<T> {
    /// Log joint probability of a state path and the observations.
    pub fn path_log_prob(&self, path: &[u8], obs: &[T]) -> T {
        let mut lp = T::zero();
        for (t, (&s, &x)) in path.iter().zip(obs).enumerate() {
            let s = s as usize;
            lp = lp
                + if t == 0 {
                    self.initial[s].ln()
                } else {
                    self.transition[path[t - 1] as usize][s].ln()
                }
                + self.emissions[s].log_pdf(x);
        }
        lp
    }
}

/// Most probable state path in log space; ties go to non-vocal.
pub fn viterbi_decode<T: Real>(model: &HmmGmmModel<T>, track: &PredictionTrack<T>) -> Result<LabelTrack> {
    let obs = track.posteriors();
    let n = obs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty posterior track".into()));
    }
    let log_a = model.transition.map(|row| row.map(|p| p.ln()));
    let emit = |t: usize| -> Result<[T; 2]> {
        let e = [
            model.emissions[0].log_pdf(obs[t]),
            model.emissions[1].log_pdf(obs[t]),
        ];
        if e.iter().all(|&v| v == T::neg_infinity()) {
            return Err(Error::InvalidArgument(format!(
                "observation {} at frame {t} has zero likelihood under both states",
                obs[t]
            )));
        }
        Ok(e)
    };
    let mut back = vec![[0u8; 2]; n];
    let e0 = emit(0)?;
    let mut score = [model.initial[0].ln() + e0[0], model.initial[1].ln() + e0[1]];
    for t in 1..n {
        let e = emit(t)?;
        let mut next = [T::zero(); 2];
        for j in 0..2 {
            let from0 = score[0] + log_a[0][j];
            let from1 = score[1] + log_a[1][j];
            let (best, arg) = if from1 > from0 { (from1, 1) } else { (from0, 0) };
            next[j] = best + e[j];
            back[t][j] = arg;
        }
        score = next;
    }
    let mut state = if score[1] > score[0] { 1u8 } else { 0u8 };
    let mut path = vec![0u8; n];
    for t in (0..n).rev() {
        path[t] = state;
        state = back[t][state as usize];
    }
    LabelTrack::new(path, *track.grid())
}
