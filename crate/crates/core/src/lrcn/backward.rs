//! Binary cross-entropy gradients by backpropagation through time.

use rayon::prelude::*;

use super::cell::{check_block, forward_trace, InputProjection};
use super::params::{Gate, LrcnParams};
use crate::error::{Error, Result};
use crate::features::FrameBlock;
use crate::scalar::{sigmoid, softplus, Real};

/// Blocks per partial accumulator. Partial sums are reduced in chunk order,
/// so results do not depend on the worker count.
const CHUNK: usize = 8;

struct Accum<T> {
    grad: Vec<T>,
    /// Per gate, `Σ_t δa_g(t) x(t)ᵀ` (hidden × feature_dim); expanded into
    /// the convolution-facing weight and kernel gradients once per batch.
    outer: [Vec<T>; 4],
    loss: T,
}

impl<T: Real> Accum<T> {
    fn new(params: &LrcnParams<T>) -> Self {
        let cfg = params.config();
        Self {
            grad: vec![T::zero(); params.len()],
            outer: Gate::ALL.map(|_| vec![T::zero(); cfg.hidden * cfg.feature_dim]),
            loss: T::zero(),
        }
    }

    fn add(mut self, other: Self) -> Self {
        for (a, b) in self.grad.iter_mut().zip(other.grad) {
            *a = *a + b;
        }
        for (mine, theirs) in self.outer.iter_mut().zip(other.outer) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a = *a + b;
            }
        }
        self.loss = self.loss + other.loss;
        self
    }
}

fn block_grad<T: Real>(
    params: &LrcnParams<T>,
    proj: &InputProjection<T>,
    block: &FrameBlock<T>,
    acc: &mut Accum<T>,
) {
    let cfg = params.config();
    let layout = params.layout();
    let (cw, hid, d) = (cfg.conv_width(), cfg.hidden, cfg.feature_dim);
    let y = T::lit(block.label.expect("checked by caller") as f64);
    let trace = forward_trace(params, proj, block.block.view());
    let z = trace.logit;
    acc.loss = acc.loss + softplus(z) - y * z;

    // head
    let dz = sigmoid(z) - y;
    acc.grad[layout.out_b] = acc.grad[layout.out_b] + dz;
    let last = trace.layers.last().expect("head input");
    for (g, &v) in acc.grad[layout.out_w.clone()].iter_mut().zip(last) {
        *g = *g + dz * v;
    }
    let mut du: Vec<T> = params.output_weights().iter().map(|&w| dz * w).collect();
    for k in (0..cfg.dense.len()).rev() {
        let out = &trace.layers[k + 1];
        let input = &trace.layers[k];
        let dpre: Vec<T> = du.iter().zip(out).map(|(&g, &a)| g * (T::one() - a * a)).collect();
        let (wr, br) = (layout.dense_w[k].clone(), layout.dense_b[k].clone());
        for (g, &v) in acc.grad[br].iter_mut().zip(&dpre) {
            *g = *g + v;
        }
        let n_in = input.len();
        for (o, &dp) in dpre.iter().enumerate() {
            for (i, &v) in input.iter().enumerate() {
                let idx = wr.start + o * n_in + i;
                acc.grad[idx] = acc.grad[idx] + dp * v;
            }
        }
        let w = params.dense_weights(k);
        du = (0..n_in)
            .map(|i| dpre.iter().enumerate().map(|(o, &dp)| w[o * n_in + i] * dp).sum())
            .collect();
    }
    let mut dh = vec![T::zero(); hid];
    for (&arg, &g) in trace.pool_arg.iter().zip(&du) {
        dh[arg] = dh[arg] + g;
    }

    // through time
    let zeros = vec![T::zero(); hid];
    let mut dc_next = vec![T::zero(); hid];
    let weights = Gate::ALL.map(|g| params.gate_weights(g));
    let cols = Gate::ALL.map(|g| cfg.gate_cols(g));
    let one = T::one();
    for t in (0..trace.steps.len()).rev() {
        let st = &trace.steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&trace.steps[t - 1].h[..], &trace.steps[t - 1].c[..])
        };
        let tanh_c: Vec<T> = st.c.iter().map(|c| c.tanh()).collect();
        let da_o: Vec<T> = (0..hid)
            .map(|k| dh[k] * tanh_c[k] * st.output[k] * (one - st.output[k]))
            .collect();
        let wo = weights[Gate::Output as usize];
        let co = cols[Gate::Output as usize];
        let dc: Vec<T> = (0..hid)
            .map(|k| {
                let peep: T = (0..hid).map(|r| wo[r * co + cw + hid + k] * da_o[r]).sum();
                dc_next[k] + dh[k] * st.output[k] * (one - tanh_c[k] * tanh_c[k]) + peep
            })
            .collect();
        let da_i: Vec<T> = (0..hid)
            .map(|k| dc[k] * st.candidate[k] * st.input[k] * (one - st.input[k]))
            .collect();
        let da_f: Vec<T> = (0..hid)
            .map(|k| dc[k] * c_prev[k] * st.forget[k] * (one - st.forget[k]))
            .collect();
        let da_c: Vec<T> = (0..hid)
            .map(|k| dc[k] * st.input[k] * (one - st.candidate[k] * st.candidate[k]))
            .collect();
        let deltas = [&da_i, &da_f, &da_c, &da_o];

        let (wi, wf) = (weights[Gate::Input as usize], weights[Gate::Forget as usize]);
        let (ci, cf) = (cols[Gate::Input as usize], cols[Gate::Forget as usize]);
        let dc_prev: Vec<T> = (0..hid)
            .map(|k| {
                let mut s = dc[k] * st.forget[k];
                for r in 0..hid {
                    s = s + wi[r * ci + cw + hid + k] * da_i[r] + wf[r * cf + cw + hid + k] * da_f[r];
                }
                s
            })
            .collect();
        let mut dh_prev = vec![T::zero(); hid];
        for g in Gate::ALL {
            let (w, c, delta) = (weights[g as usize], cols[g as usize], deltas[g as usize]);
            for (r, &dr) in delta.iter().enumerate() {
                let row = &w[r * c + cw..r * c + cw + hid];
                for (acc_h, &u) in dh_prev.iter_mut().zip(row) {
                    *acc_h = *acc_h + u * dr;
                }
            }
        }

        let x = block.block.row(t);
        for g in Gate::ALL {
            let gi = g as usize;
            let delta = deltas[gi];
            let cell: Option<&[T]> = match g {
                Gate::Input | Gate::Forget => Some(c_prev),
                Gate::Output => Some(&st.c),
                Gate::Cell => None,
            };
            let wr = layout.gate_w[gi].start;
            let br = layout.gate_b[gi].start;
            for (r, &dr) in delta.iter().enumerate() {
                acc.grad[br + r] = acc.grad[br + r] + dr;
                let base = wr + r * cols[gi] + cw;
                for (k, &hv) in h_prev.iter().enumerate() {
                    acc.grad[base + k] = acc.grad[base + k] + dr * hv;
                }
                if let Some(c) = cell {
                    for (k, &cv) in c.iter().enumerate() {
                        acc.grad[base + hid + k] = acc.grad[base + hid + k] + dr * cv;
                    }
                }
                let outer = &mut acc.outer[gi][r * d..(r + 1) * d];
                for (o, &xv) in outer.iter_mut().zip(x.iter()) {
                    *o = *o + dr * xv;
                }
            }
        }
        dh = dh_prev;
        dc_next = dc_prev;
    }
}

/// Folds the per-gate input outer products back onto the convolution-facing
/// gate weights and the kernels.
fn expand_conv_grads<T: Real>(params: &LrcnParams<T>, acc: &mut Accum<T>) {
    let cfg = params.config();
    let layout = params.layout();
    let (d, kw, pad) = (cfg.feature_dim, cfg.kernel_width, cfg.pad_left());
    for g in Gate::ALL {
        let gi = g as usize;
        let w = params.gate_weights(g);
        let cols = cfg.gate_cols(g);
        let outer = &acc.outer[gi];
        for r in 0..cfg.hidden {
            let orow = &outer[r * d..(r + 1) * d];
            for f in 0..cfg.n_filters {
                let kernel = params.kernel(f);
                for p in 0..d {
                    let widx = r * cols + f * d + p;
                    let mut dw = T::zero();
                    for j in 0..kw {
                        if let Some(q) = (p + j).checked_sub(pad).filter(|&q| q < d) {
                            dw = dw + kernel[j] * orow[q];
                            let kidx = layout.conv.start + f * kw + j;
                            acc.grad[kidx] = acc.grad[kidx] + w[widx] * orow[q];
                        }
                    }
                    let gidx = layout.gate_w[gi].start + widx;
                    acc.grad[gidx] = acc.grad[gidx] + dw;
                }
            }
        }
    }
}

pub(crate) fn backward_refs<T: Real>(
    batch: &[&FrameBlock<T>],
    params: &LrcnParams<T>,
) -> Result<(T, Vec<T>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for b in batch {
        check_block(params, b.block.view())?;
        if b.label.is_none() {
            return Err(Error::InvalidArgument("training block without a label".into()));
        }
    }
    let proj = InputProjection::new(params);
    let partials: Vec<Accum<T>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Accum::new(params);
            for b in chunk {
                block_grad(params, &proj, b, &mut acc);
            }
            acc
        })
        .collect();
    let mut acc = partials
        .into_iter()
        .reduce(Accum::add)
        .expect("non-empty batch");
    expand_conv_grads(params, &mut acc);
    let scale = T::one() / T::from_usize_lossy(batch.len());
    acc.grad.iter_mut().for_each(|g| *g = *g * scale);
    Ok((acc.loss * scale, acc.grad))
}

/// Mean binary cross-entropy over the batch and its gradient, laid out like
/// the parameters.
pub fn lrcn_backward<T: Real>(
    batch: &[FrameBlock<T>],
    params: &LrcnParams<T>,
) -> Result<(T, LrcnParams<T>)> {
    let refs: Vec<&FrameBlock<T>> = batch.iter().collect();
    let (loss, grad) = backward_refs(&refs, params)?;
    let grads = LrcnParams::from_vec(params.config().clone(), grad)?;
    Ok((loss, grads))
}

/// Mean binary cross-entropy without gradients.
pub fn lrcn_loss<T: Real>(batch: &[FrameBlock<T>], params: &LrcnParams<T>) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let proj = InputProjection::new(params);
    let mut loss = T::zero();
    for b in batch {
        check_block(params, b.block.view())?;
        let y = T::lit(
            b.label
                .ok_or_else(|| Error::InvalidArgument("block without a label".into()))? as f64,
        );
        let z = forward_trace(params, &proj, b.block.view()).logit;
        loss = loss + softplus(z) - y * z;
    }
    Ok(loss / T::from_usize_lossy(batch.len()))
}
