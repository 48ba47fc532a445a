//! Midpoint subdivision on the body template: each face splits into 4,
//! vertex count grows from 6,890 to 27,554 with the surface unchanged.
//!
//!     cargo run -p meshfit --example subdivide_template -- [out_dir]

use meshfit::{io, primitives};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/subdivide".to_string());
    std::fs::create_dir_all(&out)?;

    let template = primitives::template_body();
    println!(
        "template: V={} F={} E={}",
        template.vertex_count(),
        template.face_count(),
        template.edge_count()
    );

    let start = std::time::Instant::now();
    let fine = template.subdivide_midpoint();
    println!(
        "subdivided in {:.1} ms: V={} F={}",
        start.elapsed().as_secs_f64() * 1e3,
        fine.vertex_count(),
        fine.face_count()
    );

    io::obj::save(&template, format!("{out}/template.obj"))?;
    io::obj::save(&fine, format!("{out}/template_subdivided.obj"))?;
    println!("wrote {out}/template.obj and {out}/template_subdivided.obj");
    Ok(())
}
