//! Forward pass of the convolutional LSTM cell and the classification head.
//!
//! Gate pre-activations read `[conv(x), h(t-1), c]`, where `c` is `c(t-1)`
//! for the input and forget gates and the freshly updated `c(t)` for the
//! output gate; the candidate reads `[conv(x), h(t-1)]` only.
//!
//! The convolution has no bias or nonlinearity, so `W_g · conv(x)` is linear
//! in `x` and is evaluated through a per-gate `hidden × feature_dim`
//! projection (see [`InputProjection`]).

use ndarray::ArrayView2;

use super::params::{Gate, LrcnParams};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

/// `W_g[:, conv part] ∘ conv` collapsed to one `hidden × feature_dim` matrix per gate.
#[derive(Debug, Clone)]
pub struct InputProjection<T> {
    matrices: [Vec<T>; 4],
    dim: usize,
}

impl<T: Real> InputProjection<T> {
    pub fn new(params: &LrcnParams<T>) -> Self {
        let cfg = params.config();
        let (d, h, pad) = (cfg.feature_dim, cfg.hidden, cfg.pad_left());
        let matrices = Gate::ALL.map(|g| {
            let w = params.gate_weights(g);
            let cols = cfg.gate_cols(g);
            let mut m = vec![T::zero(); h * d];
            for row in 0..h {
                let wrow = &w[row * cols..];
                let mrow = &mut m[row * d..(row + 1) * d];
                for f in 0..cfg.n_filters {
                    let k = params.kernel(f);
                    for p in 0..d {
                        let wv = wrow[f * d + p];
                        for (j, &kj) in k.iter().enumerate() {
                            if let Some(q) = (p + j).checked_sub(pad).filter(|&q| q < d) {
                                mrow[q] = mrow[q] + wv * kj;
                            }
                        }
                    }
                }
            }
            m
        });
        Self { matrices, dim: d }
    }

    fn apply(&self, g: Gate, x: &[T], out: &mut [T]) {
        let m = &self.matrices[g as usize];
        for (o, row) in out.iter_mut().zip(m.chunks_exact(self.dim)) {
            *o = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }
}

/// Explicit `conv(x)`: `n_filters × feature_dim`, row-major, "same" zero padding.
pub fn convolve<T: Real>(params: &LrcnParams<T>, x: &[T]) -> Vec<T> {
    let cfg = params.config();
    let (d, pad) = (cfg.feature_dim, cfg.pad_left());
    let mut out = vec![T::zero(); cfg.conv_width()];
    for f in 0..cfg.n_filters {
        let k = params.kernel(f);
        for p in 0..d {
            out[f * d + p] = k
                .iter()
                .enumerate()
                .filter_map(|(j, &kj)| (p + j).checked_sub(pad).filter(|&q| q < d).map(|q| kj * x[q]))
                .sum();
        }
    }
    out
}

/// State and gate activations after one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStep<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
    pub input: Vec<T>,
    pub forget: Vec<T>,
    /// `tanh` of the candidate pre-activation.
    pub candidate: Vec<T>,
    pub output: Vec<T>,
}

fn recurrent_part<T: Real>(
    params: &LrcnParams<T>,
    g: Gate,
    h_prev: &[T],
    cell: Option<&[T]>,
    acc: &mut [T],
) {
    let cfg = params.config();
    let (cw, hid) = (cfg.conv_width(), cfg.hidden);
    let cols = cfg.gate_cols(g);
    let w = params.gate_weights(g);
    let b = params.gate_bias(g);
    for (r, a) in acc.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut s = *a + b[r];
        s = s + row[cw..cw + hid].iter().zip(h_prev).map(|(&u, &v)| u * v).sum::<T>();
        if let Some(c) = cell {
            s = s + row[cw + hid..].iter().zip(c).map(|(&u, &v)| u * v).sum::<T>();
        }
        *a = s;
    }
}

pub(crate) fn step_with<T: Real>(
    params: &LrcnParams<T>,
    proj: &InputProjection<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> CellStep<T> {
    let hid = params.config().hidden;
    let pre = |g: Gate, cell: Option<&[T]>| {
        let mut a = vec![T::zero(); hid];
        proj.apply(g, x, &mut a);
        recurrent_part(params, g, h_prev, cell, &mut a);
        a
    };
    let input: Vec<T> = pre(Gate::Input, Some(c_prev)).into_iter().map(sigmoid).collect();
    let forget: Vec<T> = pre(Gate::Forget, Some(c_prev)).into_iter().map(sigmoid).collect();
    let candidate: Vec<T> = pre(Gate::Cell, None).into_iter().map(|v| v.tanh()).collect();
    let c: Vec<T> = (0..hid)
        .map(|k| forget[k] * c_prev[k] + input[k] * candidate[k])
        .collect();
    let output: Vec<T> = pre(Gate::Output, Some(&c)).into_iter().map(sigmoid).collect();
    let h = output.iter().zip(&c).map(|(&o, &cv)| o * cv.tanh()).collect();
    CellStep {
        h,
        c,
        input,
        forget,
        candidate,
        output,
    }
}

/// One recurrent step from `(h_prev, c_prev)` on frame features `x`.
pub fn lrcn_cell_step<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    params: &LrcnParams<T>,
) -> Result<CellStep<T>> {
    let cfg = params.config();
    if x.len() != cfg.feature_dim || h_prev.len() != cfg.hidden || c_prev.len() != cfg.hidden {
        return Err(Error::ShapeMismatch(format!(
            "cell step with x {}, h {}, c {} for feature_dim {} hidden {}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            cfg.feature_dim,
            cfg.hidden
        )));
    }
    Ok(step_with(params, &InputProjection::new(params), x, h_prev, c_prev))
}

/// Everything the backward pass needs from one block.
#[derive(Debug, Clone)]
pub(crate) struct Trace<T> {
    pub steps: Vec<CellStep<T>>,
    pub pool_arg: Vec<usize>,
    /// Pooled vector followed by each dense layer's activations.
    pub layers: Vec<Vec<T>>,
    pub logit: T,
}

pub(crate) fn check_block<T: Real>(params: &LrcnParams<T>, block: ArrayView2<'_, T>) -> Result<()> {
    let cfg = params.config();
    if block.nrows() != cfg.block_len || block.ncols() != cfg.feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "block {}×{} for a model expecting {}×{}",
            block.nrows(),
            block.ncols(),
            cfg.block_len,
            cfg.feature_dim
        )));
    }
    Ok(())
}

pub(crate) fn forward_trace<T: Real>(
    params: &LrcnParams<T>,
    proj: &InputProjection<T>,
    block: ArrayView2<'_, T>,
) -> Trace<T> {
    let cfg = params.config();
    let hid = cfg.hidden;
    let mut steps: Vec<CellStep<T>> = Vec::with_capacity(block.nrows());
    let zeros = vec![T::zero(); hid];
    let mut x = vec![T::zero(); cfg.feature_dim];
    for row in block.rows() {
        x.iter_mut().zip(row.iter()).for_each(|(d, &s)| *d = s);
        let (h_prev, c_prev) = match steps.last() {
            Some(s) => (&s.h[..], &s.c[..]),
            None => (&zeros[..], &zeros[..]),
        };
        let next = step_with(params, proj, &x, h_prev, c_prev);
        steps.push(next);
    }
    let h_last = &steps.last().expect("non-empty block").h;
    let (pooled, pool_arg): (Vec<T>, Vec<usize>) = (0..cfg.pooled_len())
        .map(|j| {
            let window = j * cfg.pool..(j + 1) * cfg.pool;
            let mut best = window.start;
            for k in window {
                if h_last[k] > h_last[best] {
                    best = k;
                }
            }
            (h_last[best], best)
        })
        .unzip();
    let mut layers = vec![pooled];
    for k in 0..cfg.dense.len() {
        let input = layers.last().expect("pooled layer");
        let w = params.dense_weights(k);
        let b = params.dense_bias(k);
        let act = w
            .chunks_exact(input.len())
            .zip(b)
            .map(|(row, &bias)| (row.iter().zip(input).map(|(&a, &v)| a * v).sum::<T>() + bias).tanh())
            .collect();
        layers.push(act);
    }
    let last = layers.last().expect("head input");
    let logit = params
        .output_weights()
        .iter()
        .zip(last)
        .map(|(&w, &v)| w * v)
        .sum::<T>()
        + params.output_bias();
    Trace {
        steps,
        pool_arg,
        layers,
        logit,
    }
}

/// Voicing posterior of one block.
pub fn lrcn_forward_block<T: Real>(block: ArrayView2<'_, T>, params: &LrcnParams<T>) -> Result<T> {
    check_block(params, block)?;
    let proj = InputProjection::new(params);
    Ok(sigmoid(forward_trace(params, &proj, block).logit))
}
