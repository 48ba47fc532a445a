//! Software rasterizer: z-buffered triangle fill producing silhouettes,
//! depth maps, and per-vertex visibility.
//!
//! Coverage rule: a pixel belongs to a triangle when its center lies inside,
//! with exact-boundary ties broken by a fixed top-left convention, so masks
//! are bit-reproducible and adjacent triangles never double-count a pixel.

use nalgebra::Point2;

use crate::camera::WeakPerspectiveCamera;
use crate::maps::{DepthMap, Mask};
use crate::mesh::TriMesh;

/// Renders from one weak-perspective viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMaps {
    /// Pixels covered by any triangle.
    pub silhouette: Mask,
    /// Nearest-surface z per covered pixel (meters, larger = closer).
    pub depth: DepthMap,
    /// Per-vertex: projects inside the image and lies within `eps_vis` of
    /// the z-buffer at its pixel.
    pub vertex_visibility: Vec<bool>,
}

/// Visibility tolerance along the view axis, meters. Separates genuinely
/// occluded geometry from z-quantization on the surface itself.
pub const DEFAULT_EPS_VIS: f64 = 0.01;

pub fn rasterize(mesh: &TriMesh, camera: &WeakPerspectiveCamera) -> RasterMaps {
    rasterize_with(mesh, camera, DEFAULT_EPS_VIS)
}

pub fn rasterize_with(mesh: &TriMesh, camera: &WeakPerspectiveCamera, eps_vis: f64) -> RasterMaps {
    let (width, height) = (camera.width(), camera.height());
    let mut zbuf = vec![f64::NEG_INFINITY; width * height];
    let mut covered = vec![false; width * height];

    let projected: Vec<Point2<f64>> = mesh.vertices().iter().map(|p| camera.project(p)).collect();

    for f in mesh.faces() {
        let pts = [projected[f[0]], projected[f[1]], projected[f[2]]];
        let zs = [
            mesh.vertices()[f[0]].z,
            mesh.vertices()[f[1]].z,
            mesh.vertices()[f[2]].z,
        ];
        fill_triangle(&pts, &zs, width, height, |px, py, z| {
            let i = py * width + px;
            covered[i] = true;
            if z > zbuf[i] {
                zbuf[i] = z;
            }
        });
    }

    let mut silhouette = Mask::new(width, height);
    let mut depth = DepthMap::new_invalid(width, height);
    for y in 0..height {
        for x in 0..width {
            if covered[y * width + x] {
                silhouette.set(x, y, true);
                depth.set(x, y, zbuf[y * width + x]);
            }
        }
    }

    let vertex_visibility = mesh
        .vertices()
        .iter()
        .zip(&projected)
        .map(|(p, q)| {
            if !camera.contains_pixel(q) {
                return false;
            }
            let (px, py) = (q.x.floor() as usize, q.y.floor() as usize);
            let i = py * width + px;
            covered[i] && p.z >= zbuf[i] - eps_vis
        })
        .collect();

    RasterMaps {
        silhouette,
        depth,
        vertex_visibility,
    }
}

/// Per-face seen-flags from 6 axis-aligned orthographic renders: a face is
/// seen when it wins the z-buffer for at least one pixel in at least one
/// direction.
pub fn orthographic_coverage(mesh: &TriMesh, resolution: usize) -> Vec<bool> {
    assert!(resolution >= 4);
    let (lo, hi) = mesh.bounding_box();
    let mut seen = vec![false; mesh.face_count()];

    // (principal axis, sign): view from +axis or -axis; u/v are the other
    // two coordinates
    for axis in 0..3 {
        for sign in [1.0f64, -1.0] {
            let u_axis = (axis + 1) % 3;
            let v_axis = (axis + 2) % 3;
            let extent_u = hi[u_axis] - lo[u_axis];
            let extent_v = hi[v_axis] - lo[v_axis];
            let extent = extent_u.max(extent_v).max(1e-9);
            let margin = 1.0;
            let scale = (resolution as f64 - 2.0 * margin) / extent;
            let center_u = (hi[u_axis] + lo[u_axis]) / 2.0;
            let center_v = (hi[v_axis] + lo[v_axis]) / 2.0;
            let half = resolution as f64 / 2.0;

            let mut best = vec![(f64::NEG_INFINITY, usize::MAX); resolution * resolution];
            for (fi, f) in mesh.faces().iter().enumerate() {
                let mut pts = [Point2::origin(); 3];
                let mut zs = [0.0f64; 3];
                for k in 0..3 {
                    let p = mesh.vertices()[f[k]];
                    pts[k] = Point2::new(
                        (p[u_axis] - center_u) * scale + half,
                        (p[v_axis] - center_v) * scale + half,
                    );
                    zs[k] = sign * p[axis];
                }
                fill_triangle(&pts, &zs, resolution, resolution, |px, py, z| {
                    let cell = &mut best[py * resolution + px];
                    if z > cell.0 {
                        *cell = (z, fi);
                    }
                });
            }
            for &(_, fi) in &best {
                if fi != usize::MAX {
                    seen[fi] = true;
                }
            }
        }
    }
    seen
}

/// Z-buffered triangle fill over pixel centers. Calls `emit(px, py, z)` for
/// every covered pixel with the barycentric-interpolated z.
pub fn fill_triangle(
    pts: &[Point2<f64>; 3],
    zs: &[f64; 3],
    width: usize,
    height: usize,
    mut emit: impl FnMut(usize, usize, f64),
) {
    let orient = |a: &Point2<f64>, b: &Point2<f64>, cx: f64, cy: f64| -> f64 {
        (b.x - a.x) * (cy - a.y) - (b.y - a.y) * (cx - a.x)
    };

    let mut p = [pts[0], pts[1], pts[2]];
    let mut z = [zs[0], zs[1], zs[2]];
    let area2 = orient(&p[0], &p[1], p[2].x, p[2].y);
    if area2 == 0.0 {
        return;
    }
    if area2 < 0.0 {
        p.swap(1, 2);
        z.swap(1, 2);
    }
    let area2 = area2.abs();

    // tie rule: an exactly-on-edge pixel center belongs to the triangle on
    // whose `accept_boundary` side the edge lies; antisymmetric in the edge
    // direction so shared edges are covered exactly once
    let accept_boundary = |a: &Point2<f64>, b: &Point2<f64>| -> bool {
        let dy = b.y - a.y;
        let dx = b.x - a.x;
        dy < 0.0 || (dy == 0.0 && dx > 0.0)
    };
    let accept = [
        accept_boundary(&p[0], &p[1]),
        accept_boundary(&p[1], &p[2]),
        accept_boundary(&p[2], &p[0]),
    ];

    let min_x = p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max);

    let x0 = (min_x - 0.5).floor().max(0.0) as i64;
    let x1 = (max_x - 0.5).ceil().min(width as f64 - 1.0) as i64;
    let y0 = (min_y - 0.5).floor().max(0.0) as i64;
    let y1 = (max_y - 0.5).ceil().min(height as f64 - 1.0) as i64;
    if x1 < x0 || y1 < y0 {
        return;
    }

    for py in y0..=y1 {
        let cy = py as f64 + 0.5;
        for px in x0..=x1 {
            let cx = px as f64 + 0.5;
            let w0 = orient(&p[0], &p[1], cx, cy);
            let w1 = orient(&p[1], &p[2], cx, cy);
            let w2 = orient(&p[2], &p[0], cx, cy);
            let inside = (w0 > 0.0 || (w0 == 0.0 && accept[0]))
                && (w1 > 0.0 || (w1 == 0.0 && accept[1]))
                && (w2 > 0.0 || (w2 == 0.0 && accept[2]));
            if inside {
                // w1 is opposite vertex 0, w2 opposite vertex 1, w0 opposite 2
                let depth = (w1 * z[0] + w2 * z[1] + w0 * z[2]) / area2;
                emit(px as usize, py as usize, depth);
            }
        }
    }
}
