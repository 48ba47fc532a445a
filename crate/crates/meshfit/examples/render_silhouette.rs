//! Rasterize a mesh with the weak-perspective camera: silhouette PNG,
//! depth PFM, and per-vertex visibility counts.
//!
//!     cargo run -p meshfit --example render_silhouette -- [mesh.obj] [out_dir]

use meshfit::camera::WeakPerspectiveCamera;
use meshfit::{io, primitives, raster};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let mesh = match args.next() {
        Some(path) => io::load_mesh(path)?,
        None => primitives::template_body(),
    };
    let out = args
        .next()
        .unwrap_or_else(|| "target/examples-out/render".to_string());
    std::fs::create_dir_all(&out)?;

    let (lo, hi) = mesh.bounding_box();
    let center = nalgebra::Point3::from((lo.coords + hi.coords) * 0.5);
    let camera = WeakPerspectiveCamera::framing(center, (hi - lo).norm() * 1.1, [224, 224]);
    println!(
        "camera: scale {:.1} px/m, translation ({:.1}, {:.1})",
        camera.scale, camera.translation[0], camera.translation[1]
    );

    let start = std::time::Instant::now();
    let maps = raster::rasterize(&mesh, &camera);
    let visible = maps.vertex_visibility.iter().filter(|&&v| v).count();
    println!(
        "rasterized {} faces in {:.1} ms: {} silhouette px, {}/{} vertices visible",
        mesh.face_count(),
        start.elapsed().as_secs_f64() * 1e3,
        maps.silhouette.count_set(),
        visible,
        mesh.vertex_count()
    );

    maps.silhouette.save_png(format!("{out}/silhouette.png"))?;
    io::pfm::save(&maps.depth, format!("{out}/depth.pfm"))?;
    println!("wrote {out}/silhouette.png and {out}/depth.pfm");
    Ok(())
}
