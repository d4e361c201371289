use crate::patch_grid::{FeatureVector, PatchGrid};
use crate::pruning::PrunedSet;
use crate::Scalar;

use super::{Adjacency, GraphError};

#[derive(Debug, Clone, PartialEq)]
pub struct VisualNode<T> {
    pub patch_index: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    pub feature: FeatureVector<T>,
}

/// Retained patches joined by 8-neighbour grid adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualGraph<T> {
    nodes: Vec<VisualNode<T>>,
    edges: Vec<(usize, usize)>,
}

impl<T: Scalar> VisualGraph<T> {
    pub fn nodes(&self) -> &[VisualNode<T>] {
        &self.nodes
    }

    /// Node-position pairs `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.nodes.len(), self.edges.iter().copied())
    }
}

pub fn build_visual_graph<T: Scalar>(grid: &PatchGrid<T>, pruned: &PrunedSet) -> Result<VisualGraph<T>, GraphError> {
    if pruned.total() != grid.len() {
        return Err(GraphError::GridMismatch { pruned: pruned.total(), grid: grid.len() });
    }
    if pruned.is_empty() {
        return Err(GraphError::EmptyPrunedSet);
    }
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut position = vec![usize::MAX; grid.len()];
    let nodes: Vec<VisualNode<T>> = pruned
        .retained()
        .iter()
        .enumerate()
        .map(|(pos, &idx)| {
            position[idx] = pos;
            let p = grid.patch(idx).expect("pruned set validated against grid");
            VisualNode { patch_index: idx, grid_row: p.grid_row, grid_col: p.grid_col, feature: p.feature.clone() }
        })
        .collect();

    let mut edges = Vec::new();
    for (a, node) in nodes.iter().enumerate() {
        let (r, c) = (node.grid_row as isize, node.grid_col as isize);
        for (dr, dc) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                continue;
            }
            let b = position[nr as usize * cols + nc as usize];
            if b != usize::MAX && a < b {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    Ok(VisualGraph { nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_grid::{tile_image, GrayImage};
    use crate::pruning::PruningPolicy;

    fn grid(rows: usize, cols: usize) -> PatchGrid<f64> {
        tile_image(&GrayImage::filled(rows * 8, cols * 8, 0.5).unwrap(), 8).unwrap()
    }

    fn keep(idx: &[usize], total: usize) -> PrunedSet {
        PrunedSet::new(idx.to_vec(), total, PruningPolicy::Threshold { tau: 0.0 }).unwrap()
    }

    #[test]
    fn diagonal_neighbours() {
        let g = build_visual_graph(&grid(3, 3), &keep(&[0, 4], 9)).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn single_node() {
        let g = build_visual_graph(&grid(3, 3), &keep(&[5], 9)).unwrap();
        assert_eq!((g.nodes().len(), g.edges().len()), (1, 0));
    }

    #[test]
    fn full_three_by_three() {
        let g = build_visual_graph(&grid(3, 3), &keep(&(0..9).collect::<Vec<_>>(), 9)).unwrap();
        assert_eq!(g.edges().len(), 20);
    }

    #[test]
    fn no_wraparound_across_rows() {
        // index 2 is (0,2), index 3 is (1,0): not adjacent
        let g = build_visual_graph(&grid(3, 3), &keep(&[2, 3], 9)).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn errors() {
        assert_eq!(build_visual_graph(&grid(2, 2), &keep(&[], 4)).unwrap_err(), GraphError::EmptyPrunedSet);
        assert!(matches!(build_visual_graph(&grid(2, 2), &keep(&[0], 9)), Err(GraphError::GridMismatch { .. })));
    }
}
