//! Select the 200 anchor handles on the body template by k-means over
//! position+normal features, honoring the excluded regions from the shipped
//! metadata, and dump them as JSON.
//!
//!     cargo run -p meshfit --example select_anchors -- [out.json]

use meshfit::handles;
use meshfit::primitives;

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/anchors.json".to_string());

    let template = primitives::template_body();
    let meta = handles::load_template_metadata(
        concat!(env!("CARGO_MANIFEST_DIR"), "/assets/template_meta.json"),
        template.vertex_count(),
    )?;
    println!(
        "{} candidate vertices after excluding {}",
        template.vertex_count() - meta.excluded.len(),
        meta.excluded.len()
    );

    let start = std::time::Instant::now();
    let anchors = handles::select_anchor_handles(&template, &meta.excluded, 200, 0)?;
    println!(
        "selected {} anchors in {:.0} ms",
        anchors.len(),
        start.elapsed().as_secs_f64() * 1e3
    );

    // coverage: how far is the farthest vertex from its nearest anchor?
    let worst = (0..template.vertex_count())
        .map(|i| {
            anchors
                .iter()
                .map(|a| (template.vertices()[i] - template.vertices()[a.vertex_index]).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max);
    println!("max distance to nearest anchor: {worst:.3} m");

    if let Some(parent) = std::path::Path::new(&out).parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&out, serde_json::to_string_pretty(&anchors)?)?;
    println!("wrote {out}");
    Ok(())
}
