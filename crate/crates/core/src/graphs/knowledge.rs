use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::patch_grid::FeatureVector;
use crate::Scalar;

use super::{entity_embedding, Adjacency, GraphError};

/// On-disk knowledge-graph document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgDocument {
    pub entities: Vec<EntityRecord>,
    pub relations: Vec<RelationRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub src: String,
    pub dst: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity<T> {
    pub id: String,
    pub text: String,
    pub label: String,
    pub feature: FeatureVector<T>,
}

/// Undirected labelled edge between entity positions, `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub a: usize,
    pub b: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph<T> {
    nodes: Vec<Entity<T>>,
    edges: Vec<Relation>,
}

impl<T: Scalar> KnowledgeGraph<T> {
    /// Validate a document and embed its entities at `dim`.
    ///
    /// Relations are undirected; repeats of the same endpoint pair keep the first
    /// label. Edges are stored sorted by endpoint pair.
    pub fn from_document(doc: &KgDocument, dim: usize) -> Result<Self, GraphError> {
        if doc.entities.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let mut ids = HashMap::with_capacity(doc.entities.len());
        let mut nodes = Vec::with_capacity(doc.entities.len());
        for (pos, e) in doc.entities.iter().enumerate() {
            if ids.insert(e.id.as_str(), pos).is_some() {
                return Err(GraphError::DuplicateEntityId(e.id.clone()));
            }
            nodes.push(Entity {
                id: e.id.clone(),
                text: e.text.clone(),
                label: e.label.clone(),
                feature: entity_embedding(&e.text, &e.label, dim)?,
            });
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::new();
        for (relation, r) in doc.relations.iter().enumerate() {
            let lookup = |id: &str| {
                ids.get(id).copied().ok_or_else(|| GraphError::DanglingRelation { relation, id: id.to_owned() })
            };
            let (s, d) = (lookup(&r.src)?, lookup(&r.dst)?);
            if s == d {
                return Err(GraphError::SelfRelation { relation, id: r.src.clone() });
            }
            let (a, b) = (s.min(d), s.max(d));
            if seen.insert((a, b)) {
                edges.push(Relation { a, b, label: r.label.clone() });
            }
        }
        edges.sort_by_key(|r| (r.a, r.b));
        Ok(Self { nodes, edges })
    }

    pub fn nodes(&self) -> &[Entity<T>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Relation] {
        &self.edges
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.nodes.len(), self.edges.iter().map(|r| (r.a, r.b)))
    }

    pub fn to_document(&self) -> KgDocument {
        KgDocument {
            entities: self
                .nodes
                .iter()
                .map(|e| EntityRecord { id: e.id.clone(), text: e.text.clone(), label: e.label.clone() })
                .collect(),
            relations: self
                .edges
                .iter()
                .map(|r| RelationRecord {
                    src: self.nodes[r.a].id.clone(),
                    dst: self.nodes[r.b].id.clone(),
                    label: r.label.clone(),
                })
                .collect(),
        }
    }
}

/// Parse a JSON knowledge-graph document.
pub fn parse_knowledge_graph<T: Scalar>(bytes: &[u8], dim: usize) -> Result<KnowledgeGraph<T>, GraphError> {
    let doc: KgDocument = serde_json::from_slice(bytes).map_err(|e| GraphError::MalformedDocument(e.to_string()))?;
    KnowledgeGraph::from_document(&doc, dim)
}
