use serde::{Deserialize, Serialize};

use crate::patch_grid::FeatureVector;
use crate::Scalar;

use super::{betweenness_centrality, Adjacency, GraphError, KnowledgeGraph, VisualGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    Visual,
    Text,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::Visual => 0,
            Modality::Text => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Visual),
            1 => Some(Modality::Text),
            _ => None,
        }
    }
}

/// A fused-graph node. `origin` is the patch index for visual nodes and the
/// entity position for text nodes, so `(modality, origin)` identifies a node
/// independently of its id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedNode<T> {
    pub modality: Modality,
    pub origin: u32,
    pub feature: FeatureVector<T>,
}

/// Plain serializable form of a [`UnifiedGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedGraphDoc<T> {
    pub dim: usize,
    pub nodes: Vec<UnifiedNode<T>>,
    pub edges: Vec<(usize, usize)>,
    pub bridge: (usize, usize),
}

/// Visual and text nodes in one graph, joined by exactly one cross-modal edge.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedGraph<T> {
    dim: usize,
    nodes: Vec<UnifiedNode<T>>,
    edges: Vec<(usize, usize)>,
    bridge: (usize, usize),
    // neighbour ids of every node, ordered by (modality, origin)
    neighbors: Vec<Vec<usize>>,
    // all node ids ordered by (modality, origin)
    canonical: Vec<usize>,
}

impl<T: Scalar> UnifiedGraph<T> {
    /// Validate and normalize. Edges may be given in any orientation and order;
    /// they are stored as sorted `(low, high)` pairs. `bridge` is `(visual, text)`.
    pub fn new(
        dim: usize,
        nodes: Vec<UnifiedNode<T>>,
        edges: Vec<(usize, usize)>,
        bridge: (usize, usize),
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        for (node, u) in nodes.iter().enumerate() {
            if u.feature.dim() != dim {
                return Err(GraphError::FeatureDim { node, expected: dim, actual: u.feature.dim() });
            }
        }
        let mut canonical: Vec<usize> = (0..n).collect();
        canonical.sort_by_key(|&i| (nodes[i].modality, nodes[i].origin));
        if let Some(w) = canonical
            .windows(2)
            .find(|w| (nodes[w[0]].modality, nodes[w[0]].origin) == (nodes[w[1]].modality, nodes[w[1]].origin))
        {
            return Err(GraphError::DuplicateNodeKey(nodes[w[0]].modality, nodes[w[0]].origin));
        }

        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::EdgeOutOfRange(a, b));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }

        let cross: Vec<(usize, usize)> =
            norm.iter().copied().filter(|&(a, b)| nodes[a].modality != nodes[b].modality).collect();
        let (bv, bt) = bridge;
        let bridge_ok = bv < n
            && bt < n
            && nodes[bv].modality == Modality::Visual
            && nodes[bt].modality == Modality::Text
            && cross.first() == Some(&(bv.min(bt), bv.max(bt)));
        if cross.len() > 1 {
            return Err(GraphError::CrossModalEdges(cross.len()));
        }
        if !bridge_ok {
            return Err(GraphError::BridgeMissing(bv, bt));
        }

        let mut rank = vec![0usize; n];
        for (r, &id) in canonical.iter().enumerate() {
            rank[id] = r;
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for l in &mut neighbors {
            l.sort_unstable_by_key(|&v| rank[v]);
        }

        Ok(Self { dim, nodes, edges: norm, bridge, neighbors, canonical })
    }

    pub fn from_doc(doc: UnifiedGraphDoc<T>) -> Result<Self, GraphError> {
        Self::new(doc.dim, doc.nodes, doc.edges, doc.bridge)
    }

    pub fn to_doc(&self) -> UnifiedGraphDoc<T> {
        UnifiedGraphDoc { dim: self.dim, nodes: self.nodes.clone(), edges: self.edges.clone(), bridge: self.bridge }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[UnifiedNode<T>] {
        &self.nodes
    }

    /// Sorted `(low, high)` pairs, bridge included.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(visual node, text node)`.
    pub fn bridge(&self) -> (usize, usize) {
        self.bridge
    }

    /// Neighbours of `v`, ordered by `(modality, origin)`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Node ids ordered by `(modality, origin)`.
    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical
    }

    pub fn count_modality(&self, m: Modality) -> usize {
        self.nodes.iter().filter(|n| n.modality == m).count()
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.nodes.len(), self.edges.iter().copied())
    }

    /// Same graph with node `i` moved to id `new_id[i]`.
    pub fn relabel(&self, new_id: &[usize]) -> Result<Self, GraphError> {
        assert_eq!(new_id.len(), self.nodes.len(), "relabeling must cover every node");
        let mut nodes: Vec<Option<UnifiedNode<T>>> = vec![None; self.nodes.len()];
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[new_id[old]] = Some(node.clone());
        }
        let nodes = nodes.into_iter().map(|n| n.expect("relabeling is a permutation")).collect();
        let edges = self.edges.iter().map(|&(a, b)| (new_id[a], new_id[b])).collect();
        Self::new(self.dim, nodes, edges, (new_id[self.bridge.0], new_id[self.bridge.1]))
    }
}

/// Join `visual` and `knowledge` with one edge between their betweenness argmaxes.
///
/// Visual nodes come first, then text nodes, each in their original order.
/// Features are fitted to `dim` by keeping the leading entries and zero-padding.
pub fn fuse<T: Scalar>(
    visual: &VisualGraph<T>,
    knowledge: &KnowledgeGraph<T>,
    dim: usize,
) -> Result<UnifiedGraph<T>, GraphError> {
    if visual.nodes().is_empty() {
        return Err(GraphError::EmptyModality(Modality::Visual));
    }
    if knowledge.nodes().is_empty() {
        return Err(GraphError::EmptyModality(Modality::Text));
    }
    let v_anchor = betweenness_centrality::<f64>(&visual.adjacency()).argmax().expect("non-empty");
    let t_anchor = betweenness_centrality::<f64>(&knowledge.adjacency()).argmax().expect("non-empty");
    let offset = visual.nodes().len();

    let nodes = visual
        .nodes()
        .iter()
        .map(|v| UnifiedNode {
            modality: Modality::Visual,
            origin: v.patch_index as u32,
            feature: v.feature.fit_to(dim),
        })
        .chain(knowledge.nodes().iter().enumerate().map(|(pos, e)| UnifiedNode {
            modality: Modality::Text,
            origin: pos as u32,
            feature: e.feature.fit_to(dim),
        }))
        .collect();
    let edges = visual
        .edges()
        .iter()
        .copied()
        .chain(knowledge.edges().iter().map(|r| (r.a + offset, r.b + offset)))
        .chain(std::iter::once((v_anchor, t_anchor + offset)))
        .collect();
    UnifiedGraph::new(dim, nodes, edges, (v_anchor, t_anchor + offset))
}
