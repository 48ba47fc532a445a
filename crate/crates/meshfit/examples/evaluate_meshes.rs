//! Evaluation metrics on a constructed pair: silhouette IoU, and 3D error
//! in full and visible-part modes.
//!
//!     cargo run -p meshfit --example evaluate_meshes

use meshfit::camera::WeakPerspectiveCamera;
use meshfit::metrics::{self, ErrorMode};
use meshfit::{primitives, raster};
use nalgebra::{Rotation3, Vector3};

fn main() -> anyhow::Result<()> {
    let camera = WeakPerspectiveCamera::new(100.0, [112.0, 112.0], [224, 224])?;

    let gt = primitives::ellipsoid(&primitives::icosphere(4), Vector3::new(0.5, 0.45, 0.48));
    // "prediction": the ground truth pushed 8 mm away from the camera
    let pred = gt.transformed(&Rotation3::identity(), &Vector3::new(0.0, 0.0, -0.008));

    let sil_gt = raster::rasterize(&gt, &camera).silhouette;
    let sil_pred = raster::rasterize(&pred, &camera).silhouette;
    let iou = metrics::silhouette_iou(&sil_pred, &sil_gt)?;
    println!("sil IoU: {iou:.4} (depth shifts do not move the silhouette)");

    let (full, n_full) = metrics::error_3d(&pred, &gt, ErrorMode::Full, None)?;
    let (vis, n_vis) = metrics::error_3d(&pred, &gt, ErrorMode::Visible, Some(&camera))?;
    println!("3D err full: {full:.3} mm over {n_full} vertices");
    println!("3D err vis:  {vis:.3} mm over {n_vis} vertices");
    Ok(())
}
