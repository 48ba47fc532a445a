//! Indexed triangle mesh: construction, vertex normals, midpoint subdivision.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Indexed triangle mesh with per-vertex normals.
///
/// Positions are in meters. Faces are counter-clockwise vertex-index triples.
/// Normals are recomputed whenever a mesh is built, so they are always
/// consistent with the current positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vector3<f64>>,
}

impl TriMesh {
    /// Build a mesh, validating indices and rejecting degenerate faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (f, idx) in faces.iter().enumerate() {
            for &i in idx {
                if i >= vertices.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        face: f,
                        index: i,
                        vertex_count: vertices.len(),
                    });
                }
            }
            if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                let dup = if idx[0] == idx[1] { idx[0] } else { idx[2] };
                return Err(Error::DegenerateFace {
                    face: f,
                    index: dup,
                });
            }
        }
        let normals = compute_vertex_normals(&vertices, &faces);
        Ok(TriMesh {
            vertices,
            faces,
            normals,
        })
    }

    /// Same topology, new positions. Normals are recomputed.
    pub fn with_positions(&self, vertices: Vec<Point3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Other(format!(
                "position count {} does not match vertex count {}",
                vertices.len(),
                self.vertices.len()
            )));
        }
        let normals = compute_vertex_normals(&vertices, &self.faces);
        Ok(TriMesh {
            vertices,
            faces: self.faces.clone(),
            normals,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Area-weighted unit vertex normals; `(0,0,1)` for vertices with no
    /// incident face area.
    pub fn vertex_normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// Split every face into 4 by inserting edge midpoints. Shared edges
    /// share one midpoint vertex; original positions are untouched, so the
    /// refined surface coincides with the input surface.
    pub fn subdivide_midpoint(&self) -> TriMesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces = Vec::with_capacity(self.faces.len() * 4);

        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let p = Point3::from((vertices[a].coords + vertices[b].coords) * 0.5);
                vertices.push(p);
                vertices.len() - 1
            })
        };

        for f in &self.faces {
            let [v0, v1, v2] = *f;
            let m01 = mid(v0, v1, &mut vertices);
            let m12 = mid(v1, v2, &mut vertices);
            let m20 = mid(v2, v0, &mut vertices);
            faces.push([v0, m01, m20]);
            faces.push([v1, m12, m01]);
            faces.push([v2, m20, m12]);
            faces.push([m01, m12, m20]);
        }

        let normals = compute_vertex_normals(&vertices, &faces);
        TriMesh {
            vertices,
            faces,
            normals,
        }
    }

    /// Mesh with the given faces removed and orphaned vertices dropped.
    /// Remaining vertices are reindexed in their original order. Returns the
    /// new mesh and, for each kept vertex, its index in `self`.
    pub fn retain_faces(&self, keep: &[bool]) -> Result<(TriMesh, Vec<usize>)> {
        assert_eq!(keep.len(), self.faces.len());
        let kept_faces: Vec<[usize; 3]> = self
            .faces
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(f, _)| *f)
            .collect();
        if kept_faces.is_empty() {
            return Err(Error::AllFacesRemoved);
        }
        let mut used = vec![false; self.vertices.len()];
        for f in &kept_faces {
            for &i in f {
                used[i] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut old_indices = Vec::new();
        let mut vertices = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                remap[i] = vertices.len();
                vertices.push(self.vertices[i]);
                old_indices.push(i);
            }
        }
        let faces = kept_faces
            .iter()
            .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
            .collect();
        Ok((TriMesh::new(vertices, faces)?, old_indices))
    }

    /// Rigidly transform all vertices (rotation then translation).
    pub fn transformed(
        &self,
        rotation: &nalgebra::Rotation3<f64>,
        translation: &Vector3<f64>,
    ) -> TriMesh {
        let vertices = self
            .vertices
            .iter()
            .map(|p| rotation * p + translation)
            .collect();
        self.with_positions(vertices).expect("same vertex count")
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
}

/// Area-weighted average of incident face normals, normalized per vertex.
/// Degenerate faces contribute a zero cross product and drop out naturally.
pub fn compute_vertex_normals(
    vertices: &[Point3<f64>],
    faces: &[[usize; 3]],
) -> Vec<Vector3<f64>> {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for f in faces {
        let [a, b, c] = *f;
        // cross product length = 2 * face area, so this is area weighting
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    for n in &mut acc {
        let len = n.norm();
        if len > 1e-12 {
            *n /= len;
        } else {
            *n = Vector3::new(0.0, 0.0, 1.0);
        }
    }
    acc
}
