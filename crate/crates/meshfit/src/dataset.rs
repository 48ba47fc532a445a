//! Dataset-construction tooling: the candidate view grid, seeded view
//! sampling, inner-surface removal, and view rendering.

use nalgebra::{Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::WeakPerspectiveCamera;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::raster::{self, RasterMaps};

/// Candidate viewpoint grid and how many views to draw from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewSchedule {
    /// Degrees around the vertical axis.
    pub azimuths: Vec<f64>,
    /// Degrees above/below the horizontal plane.
    pub elevations: Vec<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for ViewSchedule {
    /// Azimuth 0..340 step 20, elevation -10/0/+10: 54 candidate views,
    /// 6 sampled per model.
    fn default() -> Self {
        ViewSchedule {
            azimuths: (0..18).map(|i| 20.0 * i as f64).collect(),
            elevations: vec![-10.0, 0.0, 10.0],
            sample_count: 6,
            seed: 0,
        }
    }
}

impl ViewSchedule {
    /// The full candidate grid, azimuth-major.
    pub fn candidates(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.azimuths.len() * self.elevations.len());
        for &az in &self.azimuths {
            for &el in &self.elevations {
                out.push((az, el));
            }
        }
        out
    }

    /// Seeded sampling without replacement from the candidate grid.
    pub fn sample_views(&self) -> Result<Vec<(f64, f64)>> {
        let mut pool = self.candidates();
        if self.sample_count > pool.len() {
            return Err(Error::TooManyViews {
                requested: self.sample_count,
                available: pool.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.sample_count);
        for _ in 0..self.sample_count {
            let k = rng.gen_range(0..pool.len());
            out.push(pool.swap_remove(k));
        }
        Ok(out)
    }
}

/// Remove faces invisible from all six axis-aligned orthographic views and
/// drop orphaned vertices. Evaluation then measures only the outer hull.
pub fn remove_inner_surface(mesh: &TriMesh, resolution: usize) -> Result<TriMesh> {
    let seen = raster::orthographic_coverage(mesh, resolution);
    let (cleaned, _) = mesh.retain_faces(&seen)?;
    Ok(cleaned)
}

/// A mesh posed for one candidate view, with its framing camera.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub mesh: TriMesh,
    pub camera: WeakPerspectiveCamera,
    pub maps: RasterMaps,
}

/// Rotate the mesh into the view (azimuth about +y, then elevation about
/// +x), frame it with a weak-perspective camera, and rasterize.
pub fn render_view(
    mesh: &TriMesh,
    azimuth_deg: f64,
    elevation_deg: f64,
    image_size: [usize; 2],
) -> RenderedView {
    let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), elevation_deg.to_radians())
        * Rotation3::from_axis_angle(&Vector3::y_axis(), azimuth_deg.to_radians());
    let posed = mesh.transformed(&rot, &Vector3::zeros());
    let (lo, hi) = posed.bounding_box();
    let center = Point3::from((lo.coords + hi.coords) * 0.5);
    let extent = (hi - lo).norm().max(1e-6) * 1.1;
    let camera = WeakPerspectiveCamera::framing(center, extent, image_size);
    let maps = raster::rasterize(&posed, &camera);
    RenderedView {
        azimuth_deg,
        elevation_deg,
        mesh: posed,
        camera,
        maps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;

    #[test]
    fn default_grid_is_54_views() {
        let schedule = ViewSchedule::default();
        let grid = schedule.candidates();
        assert_eq!(grid.len(), 54);
        assert_eq!(grid[0], (0.0, -10.0));
        assert_eq!(grid[53], (340.0, 10.0));
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let schedule = ViewSchedule::default();
        let a = schedule.sample_views().unwrap();
        let b = schedule.sample_views().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        let distinct: std::collections::BTreeSet<_> =
            a.iter().map(|&(az, el)| (az as i64, el as i64)).collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn different_seeds_differ() {
        let mut distinct = std::collections::BTreeSet::new();
        for seed in 0..100 {
            let schedule = ViewSchedule {
                seed,
                ..ViewSchedule::default()
            };
            distinct.insert(format!("{:?}", schedule.sample_views().unwrap()));
        }
        assert!(distinct.len() >= 99, "only {} distinct samples", distinct.len());
    }

    #[test]
    fn oversampling_rejected() {
        let schedule = ViewSchedule {
            sample_count: 55,
            ..ViewSchedule::default()
        };
        assert!(matches!(
            schedule.sample_views(),
            Err(Error::TooManyViews {
                requested: 55,
                available: 54
            })
        ));
    }

    #[test]
    fn nested_cubes_lose_inner_component() {
        let outer = primitives::cube(Point3::origin(), 1.0);
        let inner = primitives::cube(Point3::origin(), 0.3);
        let mut vertices = outer.vertices().to_vec();
        let mut faces = outer.faces().to_vec();
        let off = vertices.len();
        vertices.extend_from_slice(inner.vertices());
        faces.extend(inner.faces().iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        let mesh = TriMesh::new(vertices, faces).unwrap();

        let cleaned = remove_inner_surface(&mesh, 128).unwrap();
        assert_eq!(cleaned.face_count(), 12);
        assert_eq!(cleaned.vertex_count(), 8);
        for (a, b) in outer.vertices().iter().zip(cleaned.vertices()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn convex_mesh_unchanged() {
        let mesh = primitives::icosphere(3);
        let cleaned = remove_inner_surface(&mesh, 512).unwrap();
        assert_eq!(cleaned.face_count(), mesh.face_count());
        assert_eq!(cleaned.vertex_count(), mesh.vertex_count());
    }

    #[test]
    fn inner_removal_idempotent() {
        let outer = primitives::cube(Point3::origin(), 1.0);
        let inner = primitives::icosphere(1);
        let mut vertices = outer.vertices().to_vec();
        let mut faces = outer.faces().to_vec();
        let off = vertices.len();
        let shrunk: Vec<Point3<f64>> = inner
            .vertices()
            .iter()
            .map(|p| Point3::from(p.coords * 0.4))
            .collect();
        vertices.extend(shrunk);
        faces.extend(inner.faces().iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        let mesh = TriMesh::new(vertices, faces).unwrap();

        let once = remove_inner_surface(&mesh, 128).unwrap();
        let twice = remove_inner_surface(&once, 128).unwrap();
        assert_eq!(once.faces(), twice.faces());
        assert_eq!(once.vertices(), twice.vertices());
    }

    #[test]
    fn rendered_view_covers_image_center() {
        let mesh = primitives::icosphere(2);
        let view = render_view(&mesh, 40.0, -10.0, [224, 224]);
        assert!(view.maps.silhouette.get(112, 112));
        // rotation preserves vertex count and mesh size
        assert_eq!(view.mesh.vertex_count(), mesh.vertex_count());
    }
}
