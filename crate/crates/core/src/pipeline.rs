//! One study from raw inputs to a unified graph.

use crate::attention::{aggregate_salience, AttentionMatrix};
use crate::error::{Error, Result};
use crate::graphs::{build_visual_graph, fuse, KnowledgeGraph, UnifiedGraph};
use crate::patch_grid::{tile_image, GrayImage, VISUAL_FEATURE_DIM};
use crate::pruning::{prune_threshold, prune_topk, PrunedSet, PruningPolicy};
use crate::Scalar;

/// Default knowledge-graph embedding width.
pub const DEFAULT_KG_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub patch_size: usize,
    pub policy: PruningPolicy,
    /// Width of entity embeddings before fusion.
    pub kg_dim: usize,
    /// Common node feature width of the fused graph.
    pub dim: usize,
}

impl PipelineConfig {
    pub fn new(patch_size: usize, policy: PruningPolicy) -> Self {
        Self { patch_size, policy, kg_dim: DEFAULT_KG_DIM, dim: VISUAL_FEATURE_DIM }
    }
}

pub fn prune<T: Scalar>(attention: &AttentionMatrix<T>, policy: PruningPolicy) -> Result<PrunedSet> {
    let salience = aggregate_salience(attention);
    Ok(match policy {
        PruningPolicy::Threshold { tau } => prune_threshold(&salience, T::of(tau)),
        PruningPolicy::TopK { fraction } => prune_topk(&salience, fraction)?,
    })
}

/// Tile, prune by attention, build the visual graph and fuse it with `knowledge`.
pub fn study_graph<T: Scalar>(
    image: &GrayImage<T>,
    attention: &AttentionMatrix<T>,
    knowledge: &KnowledgeGraph<T>,
    config: &PipelineConfig,
) -> Result<(UnifiedGraph<T>, PrunedSet)> {
    let grid = tile_image(image, config.patch_size)?;
    if attention.num_patches() != grid.len() {
        return Err(Error::PatchCountMismatch { attention: attention.num_patches(), grid: grid.len() });
    }
    let pruned = prune(attention, config.policy)?;
    let visual = build_visual_graph(&grid, &pruned)?;
    Ok((fuse(&visual, knowledge, config.dim)?, pruned))
}
