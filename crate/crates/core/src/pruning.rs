//! Threshold and top-k selection of salient patches.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::SalienceVector;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PruningError {
    #[error("top-k fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("retained index {index} out of range for {total} patches")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("retained indices must be strictly increasing")]
    Unsorted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PruningPolicy {
    /// Keep patches with salience strictly above `tau`.
    Threshold { tau: f64 },
    /// Keep the `max(1, floor(fraction * N))` most salient patches.
    TopK { fraction: f64 },
}

/// Retained patch indices, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedSet {
    retained: Vec<usize>,
    total: usize,
    policy: PruningPolicy,
}

impl PrunedSet {
    pub fn new(retained: Vec<usize>, total: usize, policy: PruningPolicy) -> Result<Self, PruningError> {
        if retained.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PruningError::Unsorted);
        }
        if let Some(&index) = retained.iter().find(|&&i| i >= total) {
            return Err(PruningError::IndexOutOfRange { index, total });
        }
        Ok(Self { retained, total, policy })
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn policy(&self) -> PruningPolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    /// Structural compression: `1 - retained / total`.
    pub fn compression_ratio(&self) -> f64 {
        compression_ratio(self)
    }
}

pub fn prune_threshold<T: Scalar>(salience: &SalienceVector<T>, tau: T) -> PrunedSet {
    let retained = salience.scores().iter().enumerate().filter(|(_, s)| **s > tau).map(|(i, _)| i).collect();
    PrunedSet { retained, total: salience.len(), policy: PruningPolicy::Threshold { tau: tau.as_f64() } }
}

/// Number of patches a top-k policy keeps out of `total`.
pub fn topk_count(fraction: f64, total: usize) -> usize {
    // The small epsilon keeps products like 0.023 * 1000 from flooring to 22.
    (((fraction * total as f64) + 1e-9).floor() as usize).clamp(1, total.max(1))
}

pub fn prune_topk<T: Scalar>(salience: &SalienceVector<T>, fraction: f64) -> Result<PrunedSet, PruningError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PruningError::InvalidFraction(fraction));
    }
    let total = salience.len();
    let scores = salience.scores();
    let mut order: Vec<usize> = (0..total).collect();
    // Descending salience, ties by ascending index.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut retained: Vec<usize> = order.into_iter().take(topk_count(fraction, total).min(total)).collect();
    retained.sort_unstable();
    Ok(PrunedSet { retained, total, policy: PruningPolicy::TopK { fraction } })
}

pub fn compression_ratio(pruned: &PrunedSet) -> f64 {
    assert!(pruned.total > 0, "compression ratio of an empty grid");
    1.0 - pruned.retained.len() as f64 / pruned.total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sal(v: &[f64]) -> SalienceVector<f64> {
        SalienceVector::new(v.to_vec())
    }

    #[test]
    fn threshold_is_strict() {
        let s = sal(&[0.6, 0.4, 1.0]);
        assert_eq!(prune_threshold(&s, 0.5).retained(), &[0, 2]);
        assert!(prune_threshold(&s, 1.0).is_empty());
        assert_eq!(prune_threshold(&s, -1.0).retained(), &[0, 1, 2]);
    }

    #[test]
    fn topk_counts() {
        let s = sal(&vec![0.5; 870]);
        assert_eq!(prune_topk(&s, 0.023).unwrap().len(), 20);
        assert_eq!(prune_topk(&s, 1.0).unwrap().retained(), (0..870).collect::<Vec<_>>().as_slice());
        assert_eq!(prune_topk(&sal(&[0.1; 10]), 0.05).unwrap().len(), 1);
        assert_eq!(topk_count(0.066, 1000), 66);
        assert_eq!(topk_count(0.023, 1000), 23);
    }

    #[test]
    fn topk_tie_break_prefers_low_index() {
        let s = sal(&[0.2, 0.9, 0.2, 0.2, 0.9]);
        assert_eq!(prune_topk(&s, 0.6).unwrap().retained(), &[0, 1, 4]);
    }

    #[test]
    fn invalid_fraction() {
        let s = sal(&[1.0]);
        for k in [0.0, -0.1, 1.0001, f64::NAN] {
            assert!(matches!(prune_topk(&s, k), Err(PruningError::InvalidFraction(_))));
        }
    }

    #[test]
    fn ratios() {
        let p = PrunedSet::new((0..20).collect(), 870, PruningPolicy::TopK { fraction: 0.023 }).unwrap();
        assert!((compression_ratio(&p) - 0.9770).abs() < 1e-4);
        let p = PrunedSet::new((0..66).collect(), 1000, PruningPolicy::TopK { fraction: 0.066 }).unwrap();
        assert!((compression_ratio(&p) - 0.934).abs() < 1e-12);
        let p = PrunedSet::new((0..5).collect(), 5, PruningPolicy::TopK { fraction: 1.0 }).unwrap();
        assert_eq!(compression_ratio(&p), 0.0);
    }

    #[test]
    fn pruned_set_validation() {
        let pol = PruningPolicy::Threshold { tau: 0.0 };
        assert_eq!(PrunedSet::new(vec![2, 1], 3, pol).unwrap_err(), PruningError::Unsorted);
        assert_eq!(
            PrunedSet::new(vec![0, 3], 3, pol).unwrap_err(),
            PruningError::IndexOutOfRange { index: 3, total: 3 }
        );
    }
}
