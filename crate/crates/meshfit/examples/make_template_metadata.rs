//! Build joint-group and anchor-exclusion metadata for the built-in body
//! template from anatomical seed points, and write it as the JSON file the
//! fitting pipeline consumes.
//!
//!     cargo run -p meshfit --example make_template_metadata -- [out.json]

use meshfit::handles::{self, JointName};
use meshfit::primitives;
use nalgebra::Point3;

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/template_meta.json".to_string());

    let template = primitives::template_body();
    println!(
        "template: {} vertices, {} faces",
        template.vertex_count(),
        template.face_count()
    );

    // seeds on the 0.20 x 0.85 x 0.15 m body ellipsoid
    let joint_seeds = [
        (JointName::Head, Point3::new(0.0, 0.80, 0.0)),
        (JointName::Waist, Point3::new(0.0, 0.0, 0.14)),
        (JointName::ShoulderL, Point3::new(-0.17, 0.55, 0.0)),
        (JointName::ShoulderR, Point3::new(0.17, 0.55, 0.0)),
        (JointName::ElbowL, Point3::new(-0.19, 0.25, 0.0)),
        (JointName::ElbowR, Point3::new(0.19, 0.25, 0.0)),
        (JointName::KneeL, Point3::new(-0.12, -0.45, 0.0)),
        (JointName::KneeR, Point3::new(0.12, -0.45, 0.0)),
        (JointName::AnkleL, Point3::new(-0.08, -0.78, 0.0)),
        (JointName::AnkleR, Point3::new(0.08, -0.78, 0.0)),
    ];
    // keep anchors off the high-curvature caps and lateral tips (the
    // face / toes / fingers analogs on the stand-in template)
    let exclusion_seeds = [
        Point3::new(0.0, 0.85, 0.0),
        Point3::new(0.0, -0.85, 0.0),
        Point3::new(0.20, 0.0, 0.0),
        Point3::new(-0.20, 0.0, 0.0),
    ];

    let meta = handles::make_template_metadata(
        &template,
        &joint_seeds,
        20,
        &exclusion_seeds,
        0.10,
    )?;
    for g in &meta.groups {
        println!("{:>10}: {} vertices", g.joint_name, g.vertex_indices.len());
    }
    println!("excluded: {} vertices", meta.excluded.len());

    if let Some(parent) = std::path::Path::new(&out).parent() {
        std::fs::create_dir_all(parent)?;
    }
    handles::save_template_metadata(&meta, &out)?;
    println!("wrote {out}");
    Ok(())
}
