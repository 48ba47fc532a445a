//! Procedural test and template geometry.

use nalgebra::{Point3, Vector3};

use crate::mesh::TriMesh;

/// Regular octahedron with unit-length vertices.
pub fn octahedron() -> TriMesh {
    let vertices = vec![
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(-1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, -1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, -1.0),
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriMesh::new(vertices, faces).unwrap()
}

/// Unit icosphere: icosahedron refined by `levels` midpoint subdivisions,
/// vertices projected back onto the unit sphere each round.
pub fn icosphere(levels: usize) -> TriMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let vertices: Vec<Point3<f64>> = raw
        .iter()
        .map(|&(x, y, z)| Point3::from(Vector3::new(x, y, z).normalize()))
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut mesh = TriMesh::new(vertices, faces).unwrap();
    for _ in 0..levels {
        let sub = mesh.subdivide_midpoint();
        let renorm = sub
            .vertices()
            .iter()
            .map(|p| Point3::from(p.coords.normalize()))
            .collect();
        mesh = sub.with_positions(renorm).unwrap();
    }
    mesh
}

/// UV sphere of radius 1 around the origin, poles on the y axis.
/// `segments` longitudinal slices, `rings` latitudinal bands (`rings >= 2`).
///
/// Counts: V = segments*(rings-1) + 2, F = 2*segments*(rings-1).
pub fn uv_sphere(segments: usize, rings: usize) -> TriMesh {
    assert!(segments >= 3 && rings >= 2);
    let mut vertices = Vec::with_capacity(segments * (rings - 1) + 2);
    vertices.push(Point3::new(0.0, 1.0, 0.0));
    for i in 1..rings {
        let theta = std::f64::consts::PI * i as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Point3::new(st * cp, ct, st * sp));
        }
    }
    vertices.push(Point3::new(0.0, -1.0, 0.0));
    let south = vertices.len() - 1;

    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);
    let mut faces = Vec::with_capacity(2 * segments * (rings - 1));
    for j in 0..segments {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    for j in 0..segments {
        faces.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    TriMesh::new(vertices, faces).unwrap()
}

/// Axis-aligned ellipsoid: unit sphere scaled by the given radii.
pub fn ellipsoid(base: &TriMesh, radii: Vector3<f64>) -> TriMesh {
    let vertices = base
        .vertices()
        .iter()
        .map(|p| Point3::new(p.x * radii.x, p.y * radii.y, p.z * radii.z))
        .collect();
    base.with_positions(vertices).unwrap()
}

/// Closed axis-aligned cube centered at `center` with the given half-extent.
pub fn cube(center: Point3<f64>, half: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(8);
    for &z in &[-half, half] {
        for &y in &[-half, half] {
            for &x in &[-half, half] {
                vertices.push(Point3::new(center.x + x, center.y + y, center.z + z));
            }
        }
    }
    // 12 triangles, outward CCW winding
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3], // z = -half
        [4, 5, 6],
        [5, 7, 6], // z = +half
        [0, 1, 4],
        [1, 5, 4], // y = -half
        [2, 6, 3],
        [3, 6, 7], // y = +half
        [0, 4, 2],
        [2, 4, 6], // x = -half
        [1, 3, 5],
        [3, 7, 5], // x = +half
    ];
    TriMesh::new(vertices, faces).unwrap()
}

/// Regular triangulated height-field patch: `nx` x `ny` vertices spanning
/// `[x0, x1] x [y0, y1]`, z from the height function.
pub fn grid_patch(
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    mut height: impl FnMut(f64, f64) -> f64,
) -> TriMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / (nx - 1) as f64;
            let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / (ny - 1) as f64;
            vertices.push(Point3::new(x, y, height(x, y)));
        }
    }
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            faces.push([a, a + 1, a + nx]);
            faces.push([a + 1, a + nx + 1, a + nx]);
        }
    }
    TriMesh::new(vertices, faces).unwrap()
}

/// Body-proportioned stand-in template: a closed genus-0 mesh with exactly
/// 6,890 vertices and 13,776 faces (the vertex/face budget of the standard
/// body template this pipeline is normally run with), shaped as an upright
/// ellipsoid roughly 1.7 m tall. Joint-handle and exclusion metadata for it
/// ships in `assets/template_meta.json`.
pub fn template_body() -> TriMesh {
    // 56 * 123 + 2 = 6890 vertices, 2 * 56 * 123 = 13776 faces
    let sphere = uv_sphere(56, 124);
    ellipsoid(&sphere, Vector3::new(0.20, 0.85, 0.15))
}
