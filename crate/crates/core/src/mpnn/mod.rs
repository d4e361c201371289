//! Message passing network for binary classification of unified graphs.
//!
//! With `x_i` a node feature extended by a modality channel (+1 visual, -1 text):
//!
//! ```text
//! h0_i    = relu(W_in x_i)
//! m_i     = mean_{j in N(i)} W_msg[l] h_j          (zero when i has no neighbours)
//! h(l+1)_i = relu(W_upd[l] [h_i ; m_i] + b[l])
//! p       = sigmoid(w_out . mean_i hL_i + b_out)
//! ```
//!
//! Neighbour and readout sums run in `(modality, origin)` order, so relabeling node
//! ids gives bit-identical outputs.

mod checkpoint;
mod network;
mod train;

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::Scalar;

pub use checkpoint::{NRLM_MAGIC, NRLM_VERSION};
pub use network::{forward, grad, loss, trace, ForwardTrace, MessageGraph, PROB_CLAMP};
pub use train::{fit, train, TrainConfig, TrainReport};

#[derive(Debug, Error, PartialEq)]
pub enum MpnnError {
    #[error("graph feature dim {actual} does not match model input dim {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("bad checkpoint magic {0:?}, expected \"NRLM\"")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("checkpoint holds a non-finite parameter")]
    NonFiniteParameter,
}

/// Depth, width and input feature dim (without the modality channel).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub layers: usize,
    pub hidden: usize,
    pub feature_dim: usize,
}

impl Architecture {
    pub const DEFAULT_LAYERS: usize = 3;
    pub const DEFAULT_HIDDEN: usize = 64;

    pub fn new(layers: usize, hidden: usize, feature_dim: usize) -> Result<Self, MpnnError> {
        if hidden == 0 || feature_dim == 0 {
            return Err(MpnnError::InvalidArchitecture(format!(
                "hidden ({hidden}) and feature dim ({feature_dim}) must be positive"
            )));
        }
        Ok(Self { layers, hidden, feature_dim })
    }

    pub fn with_defaults(feature_dim: usize) -> Self {
        Self { layers: Self::DEFAULT_LAYERS, hidden: Self::DEFAULT_HIDDEN, feature_dim }
    }

    /// Width of `x_i`: features plus the modality channel.
    pub fn input_width(&self) -> usize {
        self.feature_dim + 1
    }

    pub fn parameter_count(&self) -> usize {
        let h = self.hidden;
        self.layers * (h * h + 2 * h * h + h) + h * self.input_width() + h + 1
    }
}

/// Network parameters. Gradients share this layout.
///
/// Tensor order (`tensors`, checkpoints): every `W_msg`, every `W_upd`, every
/// `b`, then `W_in`, `w_out`, `b_out`. Matrices are row-major with one row per
/// output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    arch: Architecture,
    /// `H x H` per layer.
    pub msg: Vec<Vec<T>>,
    /// `H x 2H` per layer; columns `[0, H)` act on `h_i`, `[H, 2H)` on `m_i`.
    pub upd: Vec<Vec<T>>,
    /// `H` per layer.
    pub bias: Vec<Vec<T>>,
    /// `H x (D + 1)`.
    pub input: Vec<T>,
    /// `H`.
    pub out: Vec<T>,
    pub out_bias: T,
}

/// Gradient of the loss with respect to every parameter of a [`Model`].
pub type Gradient<T> = Model<T>;

impl<T: Scalar> Model<T> {
    pub fn zeros(arch: Architecture) -> Self {
        let h = arch.hidden;
        Self {
            arch,
            msg: vec![vec![T::zero(); h * h]; arch.layers],
            upd: vec![vec![T::zero(); 2 * h * h]; arch.layers],
            bias: vec![vec![T::zero(); h]; arch.layers],
            input: vec![T::zero(); h * arch.input_width()],
            out: vec![T::zero(); h],
            out_bias: T::zero(),
        }
    }

    /// Glorot-uniform weights, zero biases, drawn in tensor order from
    /// `SplitMix64::derive(seed, 1)`.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut m = Self::zeros(arch);
        let mut rng = SplitMix64::derive(seed, 1);
        let h = arch.hidden;
        let mut fill = |w: &mut [T], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.iter_mut().for_each(|v| *v = T::of(rng.uniform(-a, a)));
        };
        for w in &mut m.msg {
            fill(w, h, h);
        }
        for w in &mut m.upd {
            fill(w, 2 * h, h);
        }
        fill(&mut m.input, arch.input_width(), h);
        fill(&mut m.out, h, 1);
        m
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut t: Vec<&[T]> = Vec::with_capacity(3 * self.arch.layers + 3);
        t.extend(self.msg.iter().map(Vec::as_slice));
        t.extend(self.upd.iter().map(Vec::as_slice));
        t.extend(self.bias.iter().map(Vec::as_slice));
        t.push(&self.input);
        t.push(&self.out);
        t.push(std::slice::from_ref(&self.out_bias));
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t: Vec<&mut [T]> = Vec::with_capacity(3 * self.arch.layers + 3);
        t.extend(self.msg.iter_mut().map(Vec::as_mut_slice));
        t.extend(self.upd.iter_mut().map(Vec::as_mut_slice));
        t.extend(self.bias.iter_mut().map(Vec::as_mut_slice));
        t.push(&mut self.input);
        t.push(&mut self.out);
        t.push(std::slice::from_mut(&mut self.out_bias));
        t
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        assert_eq!(self.arch, other.arch, "architectures differ");
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * *s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Copy into a wider model; the extra hidden units get zero incoming weights
    /// and so stay at zero.
    pub fn widen(&self, hidden: usize) -> Self {
        let old = self.arch.hidden;
        assert!(hidden >= old, "cannot shrink");
        let arch = Architecture { hidden, ..self.arch };
        let mut m = Self::zeros(arch);
        let d = arch.input_width();
        for r in 0..old {
            m.input[r * d..(r + 1) * d].copy_from_slice(&self.input[r * d..(r + 1) * d]);
            m.out[r] = self.out[r];
        }
        m.out_bias = self.out_bias;
        for l in 0..arch.layers {
            for r in 0..old {
                m.bias[l][r] = self.bias[l][r];
                m.msg[l][r * hidden..r * hidden + old].copy_from_slice(&self.msg[l][r * old..(r + 1) * old]);
                let (src, dst) = (&self.upd[l][r * 2 * old..(r + 1) * 2 * old], &mut m.upd[l][r * 2 * hidden..]);
                dst[..old].copy_from_slice(&src[..old]);
                dst[hidden..hidden + old].copy_from_slice(&src[old..]);
            }
        }
        m
    }
}
