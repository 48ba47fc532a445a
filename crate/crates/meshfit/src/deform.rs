//! Weighted soft-constraint Laplacian mesh editing.
//!
//! Moves handle vertices toward targets while preserving delta coordinates
//! everywhere: minimizes
//!
//! ```text
//! sum_i |(L v')_i - delta_i|^2  +  sum_c w_c^2 |v'_c - target_c|^2
//! ```
//!
//! per coordinate axis over one shared normal-equations system
//! `(L^T L + diag(w^2)) v' = L^T delta + w^2 target`.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::handles::AnchorHandle;
use crate::laplacian::LaplacianOperator;
use crate::mesh::TriMesh;
use crate::sparse::{conjugate_gradient, CsrMatrix, NormalEquations};

/// One soft positional constraint on a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandleConstraint {
    pub vertex_index: usize,
    pub target: Point3<f64>,
    pub weight: f64,
}

/// A fully specified deformation solve.
#[derive(Debug, Clone)]
pub struct DeformProblem<'a> {
    pub mesh: &'a TriMesh,
    pub laplacian: &'a LaplacianOperator,
    pub constraints: Vec<HandleConstraint>,
    /// Relative residual threshold for the iterative solver.
    pub solver_tolerance: f64,
}

pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-10;

impl<'a> DeformProblem<'a> {
    pub fn new(
        mesh: &'a TriMesh,
        laplacian: &'a LaplacianOperator,
        constraints: Vec<HandleConstraint>,
    ) -> DeformProblem<'a> {
        DeformProblem {
            mesh,
            laplacian,
            constraints,
            solver_tolerance: DEFAULT_SOLVER_TOLERANCE,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::NoConstraints);
        }
        let n = self.mesh.vertex_count();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.vertex_index >= n {
                return Err(Error::VertexIndexOutOfRange {
                    index: c.vertex_index,
                    vertex_count: n,
                });
            }
            if !(c.weight > 0.0) {
                return Err(Error::NonPositiveWeight {
                    constraint: i,
                    weight: c.weight,
                });
            }
        }
        // every connected component needs at least one constraint, or the
        // least-squares system is singular along that component's translation
        let (comp, count) = self.laplacian.components();
        let mut constrained = vec![false; count];
        for c in &self.constraints {
            constrained[comp[c.vertex_index]] = true;
        }
        if let Some(bad) = constrained.iter().position(|&ok| !ok) {
            let representative = comp.iter().position(|&c| c == bad).unwrap();
            let size = comp.iter().filter(|&&c| c == bad).count();
            return Err(Error::UnconstrainedComponent {
                representative,
                size,
            });
        }
        Ok(())
    }

    /// Dump the normal-equations matrix in Matrix Market format, for
    /// debugging solver behavior externally.
    pub fn dump_system(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let n = self.mesh.vertex_count();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            for (j, weight) in self.laplacian.row(i) {
                triplets.push((i, j, weight));
            }
        }
        let l = CsrMatrix::from_triplets(n, n, &mut triplets);
        let mut normal: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            let row: Vec<(usize, f64)> = l.row_entries(i).collect();
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    normal.push((a, b, va * vb));
                }
            }
        }
        for c in &self.constraints {
            normal.push((c.vertex_index, c.vertex_index, c.weight * c.weight));
        }
        CsrMatrix::from_triplets(n, n, &mut normal).write_matrix_market(w)
    }

    /// The minimized objective at the given positions, for diagnostics and
    /// optimality checks.
    pub fn objective(&self, positions: &[Point3<f64>]) -> f64 {
        let delta_target = self.laplacian.delta_coordinates(self.mesh.vertices());
        let delta = self.laplacian.delta_coordinates(positions);
        let mut e = 0.0;
        for (d, t) in delta.iter().zip(&delta_target) {
            e += (d - t).norm_squared();
        }
        for c in &self.constraints {
            e += c.weight * c.weight * (positions[c.vertex_index] - c.target).norm_squared();
        }
        e
    }
}

/// Solve the weighted Laplacian edit; returns a mesh with identical topology.
pub fn solve_deform(problem: &DeformProblem) -> Result<TriMesh> {
    let positions = solve_positions(problem)?;
    problem.mesh.with_positions(positions)
}

/// Solver core exposed at the position level (also used with graph-built
/// Laplacians in tests).
pub fn solve_positions(problem: &DeformProblem) -> Result<Vec<Point3<f64>>> {
    problem.validate()?;
    let n = problem.mesh.vertex_count();
    let lap = problem.laplacian;
    assert_eq!(lap.vertex_count(), n);

    // Laplacian rows as a CSR matrix
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for (j, w) in lap.row(i) {
            triplets.push((i, j, w));
        }
    }
    let l = CsrMatrix::from_triplets(n, n, &mut triplets);

    // squared constraint weights on the diagonal
    let mut w2 = vec![0.0; n];
    for c in &problem.constraints {
        w2[c.vertex_index] += c.weight * c.weight;
    }
    let op = NormalEquations::new(&l, w2);

    let delta = lap.delta_coordinates(problem.mesh.vertices());
    let mut out: Vec<Vector3<f64>> = vec![Vector3::zeros(); n];
    let max_iterations = 40 * n + 200;
    for axis in 0..3 {
        // rhs = L^T delta + w^2 * target
        let d_axis: Vec<f64> = delta.iter().map(|d| d[axis]).collect();
        let mut rhs = vec![0.0; n];
        l.add_transpose_mul_vec(&d_axis, &mut rhs);
        for c in &problem.constraints {
            rhs[c.vertex_index] += c.weight * c.weight * c.target[axis];
        }
        let x0: Vec<f64> = problem.mesh.vertices().iter().map(|p| p[axis]).collect();
        let x = conjugate_gradient(
            &op,
            &rhs,
            Some(&x0),
            problem.solver_tolerance,
            max_iterations,
        )?;
        for (o, v) in out.iter_mut().zip(&x) {
            o[axis] = *v;
        }
    }
    Ok(out.into_iter().map(Point3::from).collect())
}

/// Deform with anchor handles constrained along their normals. Active
/// anchors get `target = position + movement * constraint_normal`; inactive
/// anchors are ordinary vertices. With no active anchors the mesh is
/// returned unchanged (documented stage-level no-op).
pub fn deform_along_normals(
    mesh: &TriMesh,
    laplacian: &LaplacianOperator,
    anchors: &[AnchorHandle],
    weight: f64,
) -> Result<TriMesh> {
    let constraints: Vec<HandleConstraint> = anchors
        .iter()
        .filter(|a| a.active)
        .map(|a| HandleConstraint {
            vertex_index: a.vertex_index,
            target: mesh.vertices()[a.vertex_index] + a.constraint_normal * a.movement,
            weight,
        })
        .collect();
    if constraints.is_empty() {
        return Ok(mesh.clone());
    }
    solve_deform(&DeformProblem::new(mesh, laplacian, constraints))
}
