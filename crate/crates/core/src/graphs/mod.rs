//! Visual patch graphs, report knowledge graphs, betweenness centrality and fusion.

mod centrality;
mod embedding;
mod knowledge;
mod unified;
mod visual;

use thiserror::Error;

pub use centrality::{betweenness_centrality, CentralityScores};
pub use embedding::{entity_embedding, fnv1a64};
pub use knowledge::{
    parse_knowledge_graph, Entity, EntityRecord, KgDocument, KnowledgeGraph, Relation, RelationRecord,
};
pub use unified::{fuse, Modality, UnifiedGraph, UnifiedGraphDoc, UnifiedNode};
pub use visual::{build_visual_graph, VisualGraph, VisualNode};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("pruned set retains no patches")]
    EmptyPrunedSet,
    #[error("pruned set covers {pruned} patches but the grid has {grid}")]
    GridMismatch { pruned: usize, grid: usize },
    #[error("malformed knowledge-graph document: {0}")]
    MalformedDocument(String),
    #[error("relation {relation} references unknown entity {id:?}")]
    DanglingRelation { relation: usize, id: String },
    #[error("entity id {0:?} appears more than once")]
    DuplicateEntityId(String),
    #[error("relation {relation} links entity {id:?} to itself")]
    SelfRelation { relation: usize, id: String },
    #[error("knowledge graph has no entities")]
    EmptyGraph,
    #[error("embedding dimension must be at least 8, got {0}")]
    EmbeddingDim(usize),
    #[error("{0:?} graph has no nodes")]
    EmptyModality(Modality),
    #[error("node {node} has feature dim {actual}, expected {expected}")]
    FeatureDim { node: usize, expected: usize, actual: usize },
    #[error("edge ({0}, {1}) references a node outside the graph")]
    EdgeOutOfRange(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("two nodes share modality {0:?} and origin {1}")]
    DuplicateNodeKey(Modality, u32),
    #[error("graph has {0} cross-modal edges, expected exactly one")]
    CrossModalEdges(usize),
    #[error("bridge ({0}, {1}) is not the visual-text edge of the graph")]
    BridgeMissing(usize, usize),
}

/// Undirected simple graph as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    lists: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Build from an edge list. Panics on out-of-range endpoints; self-loops and
    /// repeated edges are dropped.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut lists = vec![Vec::new(); node_count];
        for (a, b) in edges {
            assert!(a < node_count && b < node_count, "edge ({a}, {b}) out of range");
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        Self { lists }
    }

    pub fn node_count(&self) -> usize {
        self.lists.len()
    }

    pub fn edge_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.lists[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.lists.iter().enumerate().flat_map(|(a, l)| l.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }
}
