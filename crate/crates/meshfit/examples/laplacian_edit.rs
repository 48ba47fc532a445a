//! Handle-based Laplacian editing: pin a few vertices, pull one upward, and
//! watch the rest of the surface follow while local shape is preserved.
//!
//!     cargo run -p meshfit --example laplacian_edit -- [out_dir]

use meshfit::deform::{solve_deform, DeformProblem, HandleConstraint};
use meshfit::laplacian::LaplacianOperator;
use meshfit::{io, primitives};
use nalgebra::Point3;

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/laplacian_edit".to_string());
    std::fs::create_dir_all(&out)?;

    let mesh = primitives::icosphere(4);
    let laplacian = LaplacianOperator::from_mesh(&mesh)?;

    // pull the north pole up 0.8 with a strong handle, pin the south pole
    let north = (0..mesh.vertex_count())
        .max_by(|&a, &b| {
            mesh.vertices()[a]
                .y
                .partial_cmp(&mesh.vertices()[b].y)
                .unwrap()
        })
        .unwrap();
    let south = (0..mesh.vertex_count())
        .min_by(|&a, &b| {
            mesh.vertices()[a]
                .y
                .partial_cmp(&mesh.vertices()[b].y)
                .unwrap()
        })
        .unwrap();
    let constraints = vec![
        HandleConstraint {
            vertex_index: north,
            target: mesh.vertices()[north] + nalgebra::Vector3::new(0.0, 0.8, 0.0),
            weight: 10.0,
        },
        HandleConstraint {
            vertex_index: south,
            target: mesh.vertices()[south],
            weight: 10.0,
        },
    ];

    let problem = DeformProblem::new(&mesh, &laplacian, constraints.clone());
    let start = std::time::Instant::now();
    let deformed = solve_deform(&problem)?;
    println!(
        "solved {} vertices in {:.1} ms",
        mesh.vertex_count(),
        start.elapsed().as_secs_f64() * 1e3
    );

    for c in &constraints {
        let residual = (deformed.vertices()[c.vertex_index] - c.target).norm();
        println!(
            "handle {} -> target {:?}: residual {residual:.2e} m",
            c.vertex_index,
            <[f64; 3]>::from(c.target.coords)
        );
    }
    let tip: Point3<f64> = deformed.vertices()[north];
    println!("north pole moved to y = {:.3}", tip.y);

    io::obj::save(&mesh, format!("{out}/sphere.obj"))?;
    io::obj::save(&deformed, format!("{out}/sphere_pulled.obj"))?;
    println!("wrote {out}/sphere.obj and {out}/sphere_pulled.obj");
    Ok(())
}
