//! Attention-guided structural pruning of image patch grids, fusion with report
//! knowledge graphs, a compact binary graph format and a small message-passing
//! classifier.
//!
//! Numeric types are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the pipeline and the command-line tool use.

pub mod attention;
mod error;
pub mod fixtures;
pub mod graphs;
pub mod metrics;
pub mod mpnn;
pub mod patch_grid;
pub mod pipeline;
pub mod pruning;
pub mod rng;
mod scalar;
pub mod serialization;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GrayImage = patch_grid::GrayImage<f64>;
pub type PatchGrid = patch_grid::PatchGrid<f64>;
pub type FeatureVector = patch_grid::FeatureVector<f64>;
pub type AttentionMatrix = attention::AttentionMatrix<f64>;
pub type SalienceVector = attention::SalienceVector<f64>;
pub type VisualGraph = graphs::VisualGraph<f64>;
pub type KnowledgeGraph = graphs::KnowledgeGraph<f64>;
pub type UnifiedGraph = graphs::UnifiedGraph<f64>;
pub type MpnnModel = mpnn::Model<f64>;

pub type GrayImageF32 = patch_grid::GrayImage<f32>;
pub type UnifiedGraphF32 = graphs::UnifiedGraph<f32>;
pub type MpnnModelF32 = mpnn::Model<f32>;

/// Exact scalar for centrality on graphs small enough to avoid overflow.
pub type Rational = num_rational::Ratio<i64>;
pub type ExactCentrality = graphs::CentralityScores<Rational>;

pub use pruning::{PrunedSet, PruningPolicy};
pub type SyntheticStudy = fixtures::SyntheticStudy<f64>;
