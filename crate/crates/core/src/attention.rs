//! Token x patch cross-attention matrices and per-patch salience.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::Scalar;

pub const ATTN_MAGIC: &[u8; 4] = b"ATTN";
pub const ATTN_VERSION: u16 = 1;
const ATTN_HEADER_LEN: usize = 4 + 2 + 4 + 4;

/// Allowed deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("bad magic {0:?}, expected \"ATTN\"")]
    BadMagic([u8; 4]),
    #[error("unsupported ATTN version {0}")]
    UnsupportedVersion(u16),
    #[error("payload truncated: need {expected} bytes, have {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("{0} trailing bytes after the weight block")]
    TrailingBytes(usize),
    #[error("matrix must have at least one token and one patch ({tokens}x{patches})")]
    EmptyMatrix { tokens: usize, patches: usize },
    #[error("weight buffer holds {actual} values, expected {expected}")]
    WeightCount { expected: usize, actual: usize },
    #[error("weight at row {row}, column {col} is negative")]
    NegativeWeight { row: usize, col: usize },
    #[error("weight at row {row}, column {col} is not finite")]
    NonFiniteWeight { row: usize, col: usize },
    #[error("row {row} sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}")]
    RowNotNormalized { row: usize, sum: f64 },
    #[error("concentration must be positive and finite, got {0}")]
    InvalidConcentration(f64),
}

/// `M x N` attention weights, one row per report token, rows summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix<T> {
    num_tokens: usize,
    num_patches: usize,
    weights: Vec<T>,
}

impl<T: Scalar> AttentionMatrix<T> {
    pub fn new(num_tokens: usize, num_patches: usize, weights: Vec<T>) -> Result<Self, AttentionError> {
        if num_tokens == 0 || num_patches == 0 {
            return Err(AttentionError::EmptyMatrix { tokens: num_tokens, patches: num_patches });
        }
        let expected = num_tokens * num_patches;
        if weights.len() != expected {
            return Err(AttentionError::WeightCount { expected, actual: weights.len() });
        }
        for (row, chunk) in weights.chunks_exact(num_patches).enumerate() {
            let mut sum = 0.0f64;
            for (col, w) in chunk.iter().enumerate() {
                if !w.is_finite() {
                    return Err(AttentionError::NonFiniteWeight { row, col });
                }
                if *w < T::zero() {
                    return Err(AttentionError::NegativeWeight { row, col });
                }
                sum += w.as_f64();
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(AttentionError::RowNotNormalized { row, sum });
            }
        }
        Ok(Self { num_tokens, num_patches, weights })
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn num_patches(&self) -> usize {
        self.num_patches
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn row(&self, token: usize) -> &[T] {
        &self.weights[token * self.num_patches..(token + 1) * self.num_patches]
    }

    /// Stack the rows of `other` below `self`.
    pub fn concat(&self, other: &Self) -> Option<Self> {
        (self.num_patches == other.num_patches).then(|| {
            let mut weights = self.weights.clone();
            weights.extend_from_slice(&other.weights);
            Self { num_tokens: self.num_tokens + other.num_tokens, num_patches: self.num_patches, weights }
        })
    }

    /// Parse the little-endian ATTN format.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AttentionError> {
        if bytes.len() < 4 {
            return Err(AttentionError::TruncatedPayload { expected: ATTN_HEADER_LEN, actual: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if &magic != ATTN_MAGIC {
            return Err(AttentionError::BadMagic(magic));
        }
        if bytes.len() < ATTN_HEADER_LEN {
            return Err(AttentionError::TruncatedPayload { expected: ATTN_HEADER_LEN, actual: bytes.len() });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != ATTN_VERSION {
            return Err(AttentionError::UnsupportedVersion(version));
        }
        let m = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let n = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
        let expected = m
            .checked_mul(n)
            .and_then(|c| c.checked_mul(4))
            .and_then(|c| c.checked_add(ATTN_HEADER_LEN))
            .unwrap_or(usize::MAX);
        if bytes.len() < expected {
            return Err(AttentionError::TruncatedPayload { expected, actual: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(AttentionError::TrailingBytes(bytes.len() - expected));
        }
        let weights = bytes[ATTN_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        Self::new(m, n, weights)
    }

    /// Weights are narrowed to `f32` on disk.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ATTN_HEADER_LEN + 4 * self.weights.len());
        out.extend_from_slice(ATTN_MAGIC);
        out.extend_from_slice(&ATTN_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_tokens as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_patches as u32).to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&(w.as_f64() as f32).to_le_bytes());
        }
        out
    }
}

/// Cumulative attention each patch receives over all tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SalienceVector<T> {
    scores: Vec<T>,
}

impl<T: Scalar> SalienceVector<T> {
    /// Panics on negative or non-finite scores.
    pub fn new(scores: Vec<T>) -> Self {
        assert!(scores.iter().all(|s| s.is_finite() && *s >= T::zero()), "salience must be finite and non-negative");
        Self { scores }
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().map(|s| s.as_f64()).sum()
    }

    /// Scores sorted descending.
    pub fn rank_curve(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.scores.iter().map(|v| v.as_f64()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

/// Column sums of the attention matrix, accumulated in `f64` in ascending token order.
pub fn aggregate_salience<T: Scalar>(attention: &AttentionMatrix<T>) -> SalienceVector<T> {
    let n = attention.num_patches();
    let mut acc = vec![0.0f64; n];
    for j in 0..attention.num_tokens() {
        for (a, w) in acc.iter_mut().zip(attention.row(j)) {
            *a += w.as_f64();
        }
    }
    SalienceVector { scores: acc.into_iter().map(T::of).collect() }
}

/// Per-rank mean of the descending-sorted salience over a corpus of equal-length vectors.
pub fn mean_rank_curve<T: Scalar>(corpus: &[SalienceVector<T>]) -> Vec<f64> {
    let Some(first) = corpus.first() else { return Vec::new() };
    let mut acc = vec![0.0; first.len()];
    for s in corpus {
        assert_eq!(s.len(), acc.len(), "salience vectors differ in length");
        for (a, v) in acc.iter_mut().zip(s.rank_curve()) {
            *a += v;
        }
    }
    let count = corpus.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    acc
}

/// Numerically stable softmax of `logits`, in place.
pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    logits.iter_mut().for_each(|l| *l /= total);
}

/// Seeded synthetic attention.
///
/// Scheme: one standard Gumbel "focus" value `g_i` is drawn per patch and shared by
/// every token; token `j` then draws uniform jitter `u_ji` in `[0, 1)` and its row is
/// `softmax((g_i + u_ji) / concentration)`. All draws come from
/// `SplitMix64::derive(seed, 0xA7)`, patches first, then tokens row-major. Small
/// concentrations push every row onto the few patches with the largest focus, so
/// the aggregated salience is sharply peaked; large ones approach uniform.
pub fn synth_attention<T: Scalar>(
    seed: u64,
    num_tokens: usize,
    num_patches: usize,
    concentration: f64,
) -> Result<AttentionMatrix<T>, AttentionError> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(AttentionError::InvalidConcentration(concentration));
    }
    if num_tokens == 0 || num_patches == 0 {
        return Err(AttentionError::EmptyMatrix { tokens: num_tokens, patches: num_patches });
    }
    let mut rng = SplitMix64::derive(seed, 0xA7);
    let focus: Vec<f64> = (0..num_patches).map(|_| rng.gumbel()).collect();
    let mut weights = Vec::with_capacity(num_tokens * num_patches);
    let mut row = vec![0.0f64; num_patches];
    for _ in 0..num_tokens {
        for (r, g) in row.iter_mut().zip(&focus) {
            *r = (g + rng.next_f64()) / concentration;
        }
        softmax_in_place(&mut row);
        weights.extend(row.iter().map(|&w| T::of(w)));
    }
    AttentionMatrix::new(num_tokens, num_patches, weights)
}
