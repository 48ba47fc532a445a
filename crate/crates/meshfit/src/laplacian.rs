//! Uniform-weight graph Laplacian over mesh connectivity and delta
//! (differential) coordinates.
//!
//! Convention: `delta_i = mean(neighbors of i) - v_i`, i.e. the operator row
//! for vertex `i` carries `-1` on the diagonal and `1/degree(i)` per
//! neighbor. Preserving deltas preserves local surface shape under editing.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    vertex_count: usize,
    /// CSR offsets into `neighbors`, length `vertex_count + 1`.
    offsets: Vec<usize>,
    /// Neighbor vertex indices, sorted within each row.
    neighbors: Vec<usize>,
    /// Uniform weight `1/degree(i)`, parallel to `neighbors`.
    weights: Vec<f64>,
}

impl LaplacianOperator {
    /// Build from mesh edge connectivity. Errors on isolated vertices.
    pub fn from_mesh(mesh: &TriMesh) -> Result<LaplacianOperator> {
        let mut edges = Vec::with_capacity(mesh.face_count() * 3);
        for f in mesh.faces() {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.push((a.min(b), a.max(b)));
            }
        }
        Self::from_edges(mesh.vertex_count(), &edges)
    }

    /// Build from an explicit undirected edge list (duplicates ignored).
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<LaplacianOperator> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); vertex_count];
        let mut sorted: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        sorted.sort_unstable();
        sorted.dedup();
        for (a, b) in sorted {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::VertexIndexOutOfRange {
                    index: a.max(b),
                    vertex_count,
                });
            }
            if a == b {
                continue;
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }

        let mut offsets = Vec::with_capacity(vertex_count + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for (i, adj) in adjacency.iter_mut().enumerate() {
            if adj.is_empty() {
                return Err(Error::IsolatedVertex { index: i });
            }
            adj.sort_unstable();
            let w = 1.0 / adj.len() as f64;
            for &j in adj.iter() {
                neighbors.push(j);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Ok(LaplacianOperator {
            vertex_count,
            offsets,
            neighbors,
            weights,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.offsets[vertex + 1] - self.offsets[vertex]
    }

    /// Neighbor indices of `vertex`, sorted.
    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        &self.neighbors[self.offsets[vertex]..self.offsets[vertex + 1]]
    }

    /// Row entries `(column, weight)` including the implicit `-1` diagonal.
    pub fn row(&self, vertex: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[vertex]..self.offsets[vertex + 1];
        std::iter::once((vertex, -1.0)).chain(
            self.neighbors[range.clone()]
                .iter()
                .zip(&self.weights[range])
                .map(|(&j, &w)| (j, w)),
        )
    }

    /// Delta coordinates: `delta_i = mean(neighbors) - v_i`.
    pub fn delta_coordinates(&self, positions: &[Point3<f64>]) -> Vec<Vector3<f64>> {
        assert_eq!(positions.len(), self.vertex_count);
        (0..self.vertex_count)
            .map(|i| {
                let mut acc = Vector3::zeros();
                for (j, w) in self.row(i) {
                    acc += positions[j].coords * w;
                }
                acc
            })
            .collect()
    }

    /// Connected components of the underlying graph: component id per vertex
    /// and component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.vertex_count];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.vertex_count {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &n in self.neighbors(v) {
                    if comp[n] == usize::MAX {
                        comp[n] = count;
                        stack.push(n);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}
