use std::fmt::Write;

use crate::error::Result;
use crate::fixtures::{dummy_kg, SyntheticStudy};
use crate::graphs::{KnowledgeGraph, UnifiedGraph};
use crate::mpnn::{fit, forward, Architecture, TrainConfig};
use crate::patch_grid::VISUAL_FEATURE_DIM;
use crate::pipeline::{study_graph, PipelineConfig, DEFAULT_KG_DIM};
use crate::pruning::PruningPolicy;
use crate::Scalar;

use super::{auc, ScoredLabels};

/// Which text graph is fused with each study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextMode {
    Report,
    /// Every study gets the same single-entity graph.
    DummyNode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub patch_size: usize,
    pub kg_dim: usize,
    pub dim: usize,
    pub layers: usize,
    pub hidden: usize,
    pub train: TrainConfig,
    pub text: TextMode,
}

impl Default for SweepConfig {
    /// 8-pixel patches, 64-dim entity embeddings fitted to the 66-dim visual
    /// features, a 3-layer 16-wide network and 40 epochs of SGD at 0.03.
    fn default() -> Self {
        Self {
            patch_size: 8,
            kg_dim: DEFAULT_KG_DIM,
            dim: VISUAL_FEATURE_DIM,
            layers: Architecture::DEFAULT_LAYERS,
            hidden: 16,
            train: TrainConfig { epochs: 40, learning_rate: 0.03, seed: 7 },
            text: TextMode::Report,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub compression: f64,
    pub auc: f64,
}

/// Index ranges of the 70/15/15 train/validation/test split, in corpus order.
pub fn split_ranges(count: usize) -> [std::ops::Range<usize>; 3] {
    let train = count * 70 / 100;
    let val = count * 15 / 100;
    [0..train, train..train + val, train + val..count]
}

/// For each fraction: prune at top-k, fuse, train on the first 70 % and report
/// test-split AUC. Compression is averaged over the whole corpus.
pub fn ablation_sweep<T: Scalar>(
    corpus: &[SyntheticStudy<T>],
    fractions: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    let kgs: Vec<KnowledgeGraph<T>> = match config.text {
        TextMode::Report => corpus.iter().map(|s| s.knowledge_graph(config.kg_dim)).collect::<Result<_, _>>()?,
        TextMode::DummyNode => vec![KnowledgeGraph::from_document(&dummy_kg(), config.kg_dim)?; corpus.len()],
    };
    let arch = Architecture::new(config.layers, config.hidden, config.dim)?;
    let [train_idx, _, test_idx] = split_ranges(corpus.len());

    let mut rows = Vec::with_capacity(fractions.len());
    for &k in fractions {
        let pipeline = PipelineConfig {
            patch_size: config.patch_size,
            policy: PruningPolicy::TopK { fraction: k },
            kg_dim: config.kg_dim,
            dim: config.dim,
        };
        let mut graphs: Vec<(UnifiedGraph<T>, bool)> = Vec::with_capacity(corpus.len());
        let mut compression = 0.0;
        for (study, kg) in corpus.iter().zip(&kgs) {
            let (g, pruned) = study_graph(&study.image, &study.attention, kg, &pipeline)?;
            compression += pruned.compression_ratio();
            graphs.push((g, study.label));
        }
        let (model, _) = fit(arch, &graphs[train_idx.clone()], &config.train)?;
        let mut scored = Vec::with_capacity(test_idx.len());
        for (g, label) in &graphs[test_idx.clone()] {
            scored.push((forward(&model, g)?.as_f64(), *label));
        }
        rows.push(SweepRow {
            k,
            compression: compression / corpus.len() as f64,
            auc: auc(&scored.into_iter().collect::<ScoredLabels<f64>>())?,
        });
    }
    Ok(rows)
}

/// `k,compression,auc` with six decimals.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("k,compression,auc\n");
    for r in rows {
        writeln!(out, "{:.6},{:.6},{:.6}", r.k, r.compression, r.auc).expect("write to String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let [a, b, c] = split_ranges(1000);
        assert_eq!((a.len(), b.len(), c.len()), (700, 150, 150));
        let [a, b, c] = split_ranges(11);
        assert_eq!(a.len() + b.len() + c.len(), 11);
    }

    #[test]
    fn csv_format() {
        let rows =
            [SweepRow { k: 1.0, compression: 0.0, auc: 0.953125 }, SweepRow { k: 0.023, compression: 0.98, auc: 0.9 }];
        assert_eq!(sweep_csv(&rows), "k,compression,auc\n1.000000,0.000000,0.953125\n0.023000,0.980000,0.900000\n");
    }
}
