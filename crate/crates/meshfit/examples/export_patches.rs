//! Export handle-centered training patches: 10 joint patches (64x64) and
//! 200 anchor patches (32x32) with their oracle labels.
//!
//!     cargo run -p meshfit --example export_patches -- [out_dir]

use std::collections::BTreeSet;

use meshfit::camera::WeakPerspectiveCamera;
use meshfit::fitting::JointObservations;
use meshfit::handles::{self, JointName};
use meshfit::maps::ScalarMap;
use meshfit::patches::{self, PatchLabel};
use meshfit::{primitives, raster};
use nalgebra::{Point3, Vector3};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/patches".to_string());
    std::fs::create_dir_all(&out)?;

    let camera = WeakPerspectiveCamera::new(100.0, [112.0, 112.0], [224, 224])?;
    let mesh = primitives::ellipsoid(&primitives::icosphere(3), Vector3::new(0.5, 0.5, 0.5));
    // target: a slightly wider body, so the oracles produce nonzero labels
    let target = primitives::ellipsoid(&primitives::icosphere(4), Vector3::new(0.55, 0.46, 0.5));
    let gt_sil = raster::rasterize(&target, &camera).silhouette;
    // flat gray image stands in for the photo
    let image = ScalarMap::from_fn(224, 224, |x, y| {
        Some(if gt_sil.get(x as i64, y as i64) { 0.7 } else { 0.2 })
    });

    // joint level
    let seeds: Vec<(JointName, Point3<f64>)> = JointName::ALL
        .iter()
        .map(|&n| {
            let a = n.index() as f64 / 10.0 * std::f64::consts::TAU;
            (n, Point3::new(a.cos() * 0.5, a.sin() * 0.5, 0.0))
        })
        .collect();
    let meta = handles::make_template_metadata(&mesh, &seeds, 12, &[], 0.0)?;
    let observations: JointObservations = std::array::from_fn(|i| {
        let a = i as f64 / 10.0 * std::f64::consts::TAU;
        Some(nalgebra::Point2::new(
            112.0 + 55.0 * a.cos(),
            112.0 + 46.0 * a.sin(),
        ))
    });
    let joint_set =
        patches::export_joint_patches(&image, &mesh, &camera, &meta.groups, &observations)?;
    println!("joint level: {} patches of 64x64", joint_set.patches.len());
    for p in &joint_set.patches {
        p.save_image_png(format!("{out}/joint_{}.png", p.handle_name))?;
    }

    // anchor level
    let anchors = handles::select_anchor_handles(&mesh, &BTreeSet::new(), 200, 0)?;
    let anchor_set =
        patches::export_anchor_patches(&image, &mesh, &camera, &anchors, &gt_sil, 20.0)?;
    let active = anchor_set
        .patches
        .iter()
        .filter(|p| matches!(p.label, PatchLabel::AnchorMovement(Some(_))))
        .count();
    println!(
        "anchor level: {} patches of 32x32, {} with active movement labels",
        anchor_set.patches.len(),
        active
    );
    for p in anchor_set.patches.iter().take(10) {
        p.save_image_png(format!("{out}/{}.png", p.handle_name))?;
    }
    println!("wrote sample patches to {out}/");
    Ok(())
}
