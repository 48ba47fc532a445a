//! Shared fixtures for the integration and acceptance suites.

use meshfit::camera::WeakPerspectiveCamera;
use meshfit::deform::{solve_deform, DeformProblem, HandleConstraint};
use meshfit::handles::{self, JointName, TemplateMetadata};
use meshfit::laplacian::LaplacianOperator;
use meshfit::mesh::TriMesh;
use meshfit::primitives;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard 224x224 camera centered on the origin.
pub fn camera_224(scale: f64) -> WeakPerspectiveCamera {
    WeakPerspectiveCamera::new(scale, [112.0, 112.0], [224, 224]).unwrap()
}

/// A small body-proportioned test mesh (842 vertices) with 10 joint groups
/// placed at anatomical-ish seeds.
pub fn small_body() -> (TriMesh, TemplateMetadata) {
    let mesh = primitives::ellipsoid(
        &primitives::uv_sphere(24, 36),
        Vector3::new(0.20, 0.80, 0.15),
    );
    let seeds = [
        (JointName::Head, Point3::new(0.0, 0.75, 0.0)),
        (JointName::Waist, Point3::new(0.0, 0.0, 0.14)),
        (JointName::ShoulderL, Point3::new(-0.17, 0.50, 0.0)),
        (JointName::ShoulderR, Point3::new(0.17, 0.50, 0.0)),
        (JointName::ElbowL, Point3::new(-0.19, 0.22, 0.0)),
        (JointName::ElbowR, Point3::new(0.19, 0.22, 0.0)),
        (JointName::KneeL, Point3::new(-0.12, -0.42, 0.0)),
        (JointName::KneeR, Point3::new(0.12, -0.42, 0.0)),
        (JointName::AnkleL, Point3::new(-0.08, -0.72, 0.0)),
        (JointName::AnkleR, Point3::new(0.08, -0.72, 0.0)),
    ];
    let meta = handles::make_template_metadata(&mesh, &seeds, 14, &[], 0.0).unwrap();
    (mesh, meta)
}

/// Deform `mesh` by pushing `count` randomly chosen joint groups by random
/// in-plane offsets of `min_m..max_m` meters. Used to build perturbed-pose
/// fixtures.
pub fn perturb_pose(
    mesh: &TriMesh,
    meta: &TemplateMetadata,
    seed: u64,
    count: usize,
    min_m: f64,
    max_m: f64,
) -> TriMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut group_ids: Vec<usize> = (0..meta.groups.len()).collect();
    for i in (1..group_ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        group_ids.swap(i, j);
    }
    let mut constraints = Vec::new();
    for &g in group_ids.iter().take(count) {
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let mag = rng.gen_range(min_m..max_m);
        let offset = Vector3::new(angle.cos() * mag, angle.sin() * mag, 0.0);
        for &v in &meta.groups[g].vertex_indices {
            constraints.push(HandleConstraint {
                vertex_index: v,
                target: mesh.vertices()[v] + offset,
                weight: 10.0,
            });
        }
    }
    let laplacian = LaplacianOperator::from_mesh(mesh).unwrap();
    solve_deform(&DeformProblem::new(mesh, &laplacian, constraints)).unwrap()
}
