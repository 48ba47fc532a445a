//! Fit a sphere template against the rendered silhouette of an ellipsoid
//! (axes ratio 1.2) using the anchor stage, and print the IoU per stage.
//!
//!     cargo run -p meshfit --example fit_silhouette -- [out_dir]

use meshfit::camera::WeakPerspectiveCamera;
use meshfit::config::FitConfig;
use meshfit::fitting::{self, PipelineInputs};
use meshfit::metrics;
use meshfit::{io, primitives, raster};
use nalgebra::Vector3;

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/fit_silhouette".to_string());
    std::fs::create_dir_all(&out)?;

    let camera = WeakPerspectiveCamera::new(100.0, [112.0, 112.0], [224, 224])?;

    // template: 0.5 m sphere; ground truth: 0.52 x 0.4333 x 0.5 ellipsoid
    let template = primitives::ellipsoid(
        &primitives::icosphere(3),
        Vector3::new(0.5, 0.5, 0.5),
    );
    let target = primitives::ellipsoid(
        &primitives::icosphere(4),
        Vector3::new(0.52, 0.52 / 1.2, 0.5),
    );
    let gt_sil = raster::rasterize(&target, &camera).silhouette;
    gt_sil.save_png(format!("{out}/gt_silhouette.png"))?;

    let mut config = FitConfig::default();
    config.apply_override("stages.joint.enabled=false")?;
    config.apply_override("stages.vertex.enabled=false")?;

    let inputs = PipelineInputs {
        silhouette: Some(gt_sil.clone()),
        ..PipelineInputs::default()
    };
    let start = std::time::Instant::now();
    let result = fitting::run_pipeline(template.clone(), camera, &inputs, &config)?;
    println!("fit in {:.2} s", start.elapsed().as_secs_f64());

    for snap in &result.report.snapshots {
        println!(
            "{:>8}: IoU {:.4}",
            snap.stage,
            snap.sil_iou.unwrap_or(f64::NAN)
        );
    }

    let final_sil = raster::rasterize(&result.state.mesh, &camera).silhouette;
    let final_iou = metrics::silhouette_iou(&final_sil, &gt_sil)?;
    println!("final IoU: {final_iou:.4}");

    io::obj::save(&template, format!("{out}/template.obj"))?;
    io::obj::save(&result.state.mesh, format!("{out}/fitted.obj"))?;
    final_sil.save_png(format!("{out}/fitted_silhouette.png"))?;
    println!("wrote meshes and silhouettes to {out}/");
    Ok(())
}
