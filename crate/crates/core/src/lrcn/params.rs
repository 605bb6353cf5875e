use std::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gates of the recurrent cell, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    /// Whether the gate also reads the cell state (C(t-1) for input/forget, C(t) for output).
    pub fn reads_cell(self) -> bool {
        self != Gate::Cell
    }
}

/// Architecture of the convolutional LSTM classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LrcnConfig {
    pub feature_dim: usize,
    /// Number of 1-D kernels run along the feature axis.
    pub n_filters: usize,
    pub kernel_width: usize,
    pub hidden: usize,
    /// Max-pool length over the final hidden state.
    pub pool: usize,
    /// Widths of the tanh dense layers between pooling and the sigmoid unit.
    pub dense: Vec<usize>,
    pub block_len: usize,
}

impl LrcnConfig {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            n_filters: 256,
            kernel_width: 4,
            hidden: 32,
            pool: 2,
            dense: vec![64],
            block_len: crate::features::DEFAULT_BLOCK_LEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("LRCN config: {m}")));
        if self.feature_dim == 0 || self.n_filters == 0 || self.kernel_width == 0 {
            return bad("feature_dim, n_filters and kernel_width must be positive");
        }
        if self.pool == 0 || self.hidden < self.pool {
            return bad("hidden size must be at least the pool length");
        }
        if self.dense.iter().any(|&d| d == 0) {
            return bad("dense layer widths must be positive");
        }
        if self.block_len == 0 {
            return bad("block length must be positive");
        }
        Ok(())
    }

    /// Width of the convolution output `conv(x)` (filters × feature positions).
    pub fn conv_width(&self) -> usize {
        self.n_filters * self.feature_dim
    }

    pub fn gate_cols(&self, g: Gate) -> usize {
        self.conv_width() + self.hidden + if g.reads_cell() { self.hidden } else { 0 }
    }

    pub fn pooled_len(&self) -> usize {
        self.hidden / self.pool
    }

    /// Left zero-padding of the "same" convolution.
    pub fn pad_left(&self) -> usize {
        (self.kernel_width - 1) / 2
    }
}

/// Offsets of every tensor in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub conv: Range<usize>,
    pub gate_w: [Range<usize>; 4],
    pub gate_b: [Range<usize>; 4],
    pub dense_w: Vec<Range<usize>>,
    pub dense_b: Vec<Range<usize>>,
    pub out_w: Range<usize>,
    pub out_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &LrcnConfig) -> Self {
        let mut at = 0usize;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let conv = take(cfg.n_filters * cfg.kernel_width);
        let gate_w = Gate::ALL.map(|g| take(cfg.hidden * cfg.gate_cols(g)));
        let gate_b = Gate::ALL.map(|_| take(cfg.hidden));
        let mut dense_w = Vec::new();
        let mut dense_b = Vec::new();
        let mut fan_in = cfg.pooled_len();
        for &width in &cfg.dense {
            dense_w.push(take(width * fan_in));
            dense_b.push(take(width));
            fan_in = width;
        }
        let out_w = take(fan_in);
        let out_b = take(1).start;
        Self {
            conv,
            gate_w,
            gate_b,
            dense_w,
            dense_b,
            out_w,
            out_b,
            total: at,
        }
    }
}

/// All classifier weights in one flat vector, addressed through [`Layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct LrcnParams<T> {
    config: LrcnConfig,
    layout: Layout,
    data: Vec<T>,
}

impl<T: Real> LrcnParams<T> {
    pub fn zeros(config: LrcnConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        Ok(Self {
            data: vec![T::zero(); layout.total],
            config,
            layout,
        })
    }

    pub fn from_vec(config: LrcnConfig, data: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if data.len() != layout.total {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a layout of {}",
                data.len(),
                layout.total
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self { config, layout, data })
    }

    /// Glorot-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn init(config: LrcnConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = p.config.clone();
        let mut fill = |data: &mut [T], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in data {
                *v = T::lit(rng.gen_range(-limit..limit));
            }
        };
        let l = p.layout.clone();
        fill(&mut p.data[l.conv.clone()], cfg.kernel_width, cfg.kernel_width);
        for g in Gate::ALL {
            fill(&mut p.data[l.gate_w[g as usize].clone()], cfg.gate_cols(g), cfg.hidden);
        }
        for v in &mut p.data[l.gate_b[Gate::Forget as usize].clone()] {
            *v = T::one();
        }
        let mut fan_in = cfg.pooled_len();
        for (k, &width) in cfg.dense.iter().enumerate() {
            fill(&mut p.data[l.dense_w[k].clone()], fan_in, width);
            fan_in = width;
        }
        fill(&mut p.data[l.out_w.clone()], fan_in, 1);
        Ok(p)
    }

    pub fn config(&self) -> &LrcnConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Kernel `f`, taps `0..kernel_width`.
    pub fn kernel(&self, f: usize) -> &[T] {
        let kw = self.config.kernel_width;
        &self.data[self.layout.conv.start + f * kw..][..kw]
    }

    /// Row-major `hidden × gate_cols(g)` weight over `[conv(x), h, (c)]`.
    pub fn gate_weights(&self, g: Gate) -> &[T] {
        &self.data[self.layout.gate_w[g as usize].clone()]
    }

    pub fn gate_bias(&self, g: Gate) -> &[T] {
        &self.data[self.layout.gate_b[g as usize].clone()]
    }

    pub fn dense_weights(&self, k: usize) -> &[T] {
        &self.data[self.layout.dense_w[k].clone()]
    }

    pub fn dense_bias(&self, k: usize) -> &[T] {
        &self.data[self.layout.dense_b[k].clone()]
    }

    pub fn output_weights(&self) -> &[T] {
        &self.data[self.layout.out_w.clone()]
    }

    pub fn output_bias(&self) -> T {
        self.data[self.layout.out_b]
    }
}
