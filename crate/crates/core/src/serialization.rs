//! NRLG: the binary on-disk form of a [`UnifiedGraph`].
//!
//! Little-endian layout:
//!
//! ```text
//! magic "NRLG" | version u16 | nodes u32 | edges u32 | dim u32 | bridge u32 u32
//! per node:  modality u8 (0 visual, 1 text) | origin u32 | dim x f32
//! per edge:  low u32 | high u32            (sorted, bridge included)
//! ```
//!
//! Only canonical payloads decode, so `encode(decode(b)) == b` whenever decoding
//! succeeds.

use serde::Serialize;
use thiserror::Error;

use crate::graphs::{GraphError, Modality, UnifiedGraph, UnifiedNode};
use crate::patch_grid::FeatureVector;
use crate::pruning::PrunedSet;
use crate::Scalar;

pub const NRLG_MAGIC: &[u8; 4] = b"NRLG";
pub const NRLG_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 8;

#[derive(Debug, Error, PartialEq)]
pub enum SerializationError {
    #[error("bad magic {0:?}, expected \"NRLG\"")]
    BadMagic([u8; 4]),
    #[error("unsupported NRLG version {0}")]
    UnsupportedVersion(u16),
    #[error("payload truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after the edge block")]
    TrailingBytes(usize),
    #[error("node {node} has unknown modality code {code}")]
    InvalidModality { node: usize, code: u8 },
    #[error("node {node} carries a non-finite feature")]
    NonFiniteFeature { node: usize },
    #[error("edge ({0}, {1}) references a node outside the graph")]
    EdgeOutOfRange(u32, u32),
    #[error("edge block is not in canonical order at edge {0}")]
    NonCanonicalEdges(usize),
    #[error("bridge ({0}, {1}) does not match the graph's only visual-text edge")]
    BridgeMissing(u32, u32),
    #[error("invalid graph: {0}")]
    Graph(GraphError),
}

/// NRLG bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGraph {
    bytes: Vec<u8>,
}

impl EncodedGraph {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Payload size for a graph of the given shape.
pub fn encoded_size(nodes: usize, edges: usize, dim: usize) -> usize {
    HEADER_LEN + nodes * (1 + 4 + 4 * dim) + edges * 8
}

pub fn encode<T: Scalar>(graph: &UnifiedGraph<T>) -> EncodedGraph {
    let mut out = Vec::with_capacity(encoded_size(graph.node_count(), graph.edge_count(), graph.dim()));
    let put32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(NRLG_MAGIC);
    out.extend_from_slice(&NRLG_VERSION.to_le_bytes());
    put32(&mut out, graph.node_count());
    put32(&mut out, graph.edge_count());
    put32(&mut out, graph.dim());
    put32(&mut out, graph.bridge().0);
    put32(&mut out, graph.bridge().1);
    for node in graph.nodes() {
        out.push(node.modality.code());
        out.extend_from_slice(&node.origin.to_le_bytes());
        for v in node.feature.values() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    for &(a, b) in graph.edges() {
        put32(&mut out, a);
        put32(&mut out, b);
    }
    EncodedGraph { bytes: out }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SerializationError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(SerializationError::Truncated { needed: self.pos.saturating_add(n), available: self.bytes.len() })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, SerializationError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, SerializationError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, SerializationError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, SerializationError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<UnifiedGraph<T>, SerializationError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if &magic != NRLG_MAGIC {
        return Err(SerializationError::BadMagic(magic));
    }
    let version = r.u16()?;
    if version != NRLG_VERSION {
        return Err(SerializationError::UnsupportedVersion(version));
    }
    let node_count = r.u32()? as usize;
    let edge_count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let bridge = (r.u32()?, r.u32()?);

    // Check the declared size up front so a corrupt count cannot drive a huge allocation.
    let needed = (node_count as u128) * (5 + 4 * dim as u128) + (edge_count as u128) * 8 + HEADER_LEN as u128;
    if needed > bytes.len() as u128 {
        return Err(SerializationError::Truncated {
            needed: usize::try_from(needed).unwrap_or(usize::MAX),
            available: bytes.len(),
        });
    }
    if needed < bytes.len() as u128 {
        return Err(SerializationError::TrailingBytes(bytes.len() - needed as usize));
    }

    let mut nodes = Vec::with_capacity(node_count);
    for node in 0..node_count {
        let code = r.u8()?;
        let modality = Modality::from_code(code).ok_or(SerializationError::InvalidModality { node, code })?;
        let origin = r.u32()?;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(SerializationError::NonFiniteFeature { node });
            }
            values.push(T::of(v as f64));
        }
        nodes.push(UnifiedNode { modality, origin, feature: FeatureVector::new(values) });
    }

    let mut edges = Vec::with_capacity(edge_count);
    for i in 0..edge_count {
        let (a, b) = (r.u32()?, r.u32()?);
        if a as usize >= node_count || b as usize >= node_count {
            return Err(SerializationError::EdgeOutOfRange(a, b));
        }
        let e = (a as usize, b as usize);
        if a >= b || edges.last().is_some_and(|&prev| prev >= e) {
            return Err(SerializationError::NonCanonicalEdges(i));
        }
        edges.push(e);
    }

    UnifiedGraph::new(dim, nodes, edges, (bridge.0 as usize, bridge.1 as usize)).map_err(|e| match e {
        GraphError::BridgeMissing(..) | GraphError::CrossModalEdges(_) => {
            SerializationError::BridgeMissing(bridge.0, bridge.1)
        }
        other => SerializationError::Graph(other),
    })
}

/// Structural and byte-level size of a stored study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeReport {
    pub node_compression: f64,
    pub retained_patches: usize,
    pub total_patches: usize,
    pub encoded_bytes: usize,
    pub original_bytes: usize,
    pub byte_ratio: f64,
}

pub fn size_report(original_image_bytes: usize, encoded: &EncodedGraph, pruned: &PrunedSet) -> SizeReport {
    assert!(original_image_bytes > 0, "original size must be positive");
    SizeReport {
        node_compression: pruned.compression_ratio(),
        retained_patches: pruned.len(),
        total_patches: pruned.total(),
        encoded_bytes: encoded.len(),
        original_bytes: original_image_bytes,
        byte_ratio: encoded.len() as f64 / original_image_bytes as f64,
    }
}
