use thiserror::Error;

use crate::attention::AttentionError;
use crate::fixtures::FixtureError;
use crate::graphs::GraphError;
use crate::metrics::MetricError;
use crate::mpnn::MpnnError;
use crate::patch_grid::ImageError;
use crate::pruning::PruningError;
use crate::serialization::SerializationError;

/// Any failure of the end-to-end pipeline.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Pruning(#[from] PruningError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mpnn(#[from] MpnnError),
    #[error(transparent)]
    Serialization(#[from] SerializationError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("attention covers {attention} patches but the image tiles into {grid}")]
    PatchCountMismatch { attention: usize, grid: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
