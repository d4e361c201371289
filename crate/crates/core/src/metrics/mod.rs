//! ROC AUC, BLEU-2 and the pruning-ratio sweep.

mod sweep;

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

pub use sweep::{ablation_sweep, split_ranges, sweep_csv, SweepConfig, SweepRow, TextMode};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("AUC needs at least one positive and one negative label ({positives} positive, {negatives} negative)")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("no reference translations given")]
    NoReferences,
}

/// Scores paired with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels<S> {
    pairs: Vec<(S, bool)>,
}

impl<S: PartialOrd + Copy> ScoredLabels<S> {
    pub fn new(scores: &[S], labels: &[bool]) -> Result<Self, MetricError> {
        if scores.len() != labels.len() {
            return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
        }
        Ok(Self { pairs: scores.iter().copied().zip(labels.iter().copied()).collect() })
    }

    pub fn pairs(&self) -> &[(S, bool)] {
        &self.pairs
    }
}

impl<S> FromIterator<(S, bool)> for ScoredLabels<S> {
    fn from_iter<I: IntoIterator<Item = (S, bool)>>(iter: I) -> Self {
        Self { pairs: iter.into_iter().collect() }
    }
}

/// Mann-Whitney AUC over all positive/negative pairs; ties count one half.
pub fn auc<S: PartialOrd + Copy>(data: &ScoredLabels<S>) -> Result<f64, MetricError> {
    let pos: Vec<S> = data.pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
    let neg: Vec<S> = data.pairs.iter().filter(|p| !p.1).map(|p| p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricError::DegenerateLabels { positives: pos.len(), negatives: neg.len() });
    }
    let mut wins = 0u64;
    let mut ties = 0u64;
    for p in &pos {
        for n in &neg {
            if p > n {
                wins += 1;
            } else if p == n {
                ties += 1;
            }
        }
    }
    Ok((wins as f64 + 0.5 * ties as f64) / (pos.len() as f64 * neg.len() as f64))
}

/// Lowercase, whitespace-split tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches and the candidate's n-gram total.
fn modified_precision<T: Eq + Hash, R: AsRef<[T]>>(candidate: &[T], references: &[R], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[T], usize> = HashMap::new();
    for r in references {
        for (g, c) in ngram_counts(r.as_ref(), n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let clipped = cand.iter().map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0))).sum();
    (clipped, candidate.len().saturating_sub(n - 1))
}

/// Sentence BLEU with unigram and bigram precisions, uniform weights, no smoothing.
///
/// A one-token candidate has no bigrams; its bigram precision is taken as 1 so
/// that a candidate always scores 1 against itself.
pub fn bleu2<T: Eq + Hash, R: AsRef<[T]>>(candidate: &[T], references: &[R]) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let mut log_sum = 0.0;
    for n in 1..=2 {
        let (matched, total) = modified_precision(candidate, references, n);
        if total == 0 {
            continue;
        }
        if matched == 0 {
            return Ok(0.0);
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let c = candidate.len();
    // closest reference length, shorter one on ties
    let r = references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let brevity = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(brevity * (log_sum / 2.0).exp())
}

/// [`bleu2`] over raw strings with the frozen tokenizer.
pub fn bleu2_text(candidate: &str, references: &[&str]) -> Result<f64, MetricError> {
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    bleu2(&tokenize(candidate), &refs)
}
