//! Shape-from-shading round trip: estimate SH lighting from a coarse
//! surface, refine the depth against a shaded image with a 2 mm sinusoidal
//! wrinkle, and report how much of the wrinkle was recovered.
//!
//!     cargo run -p meshfit --example refine_shading -- [out_dir]

use meshfit::camera::WeakPerspectiveCamera;
use meshfit::io::pfm;
use meshfit::maps::ScalarMap;
use meshfit::shading::{self, Albedo, SHLighting, ShadingProblem};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/examples-out/refine_shading".to_string());
    std::fs::create_dir_all(&out)?;

    let size = 96usize;
    let scale = 200.0;
    let camera = WeakPerspectiveCamera::new(scale, [48.0, 48.0], [size, size])?;
    let lighting = SHLighting::from_coefficients([1.2, 0.0, 0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let albedo = Albedo::Constant(0.6);

    // part 1: lighting round trip on a hemisphere, whose wide normal cone
    // makes all 9 coefficients identifiable
    let hemi = ScalarMap::from_fn(size, size, |x, y| {
        let u = (x as f64 + 0.5 - 48.0) / scale;
        let v = (y as f64 + 0.5 - 48.0) / scale;
        let r2 = 0.2f64 * 0.2 - u * u - v * v;
        (r2 > 0.0).then(|| r2.sqrt())
    });
    let hemi_image = shading::render_shading(&hemi, &camera, &lighting, &albedo);
    let hemi_problem = ShadingProblem::new(hemi_image, albedo.clone(), hemi, camera)?;
    let estimated = shading::estimate_lighting(&hemi_problem)?;
    println!("lighting estimated from the hemisphere (truth in parentheses):");
    for (k, (e, t)) in estimated
        .coefficients
        .iter()
        .zip(&lighting.coefficients)
        .enumerate()
    {
        println!("  l{}: {e:+.6} ({t:+.1})", k + 1);
    }
    println!("fit residual: {:.2e}", estimated.rms_residual);

    // part 2: depth refinement against a wrinkled image on a gentle cap
    let coarse = ScalarMap::from_fn(size, size, |x, y| {
        let u = (x as f64 + 0.5 - 48.0) / scale;
        let v = (y as f64 + 0.5 - 48.0) / scale;
        Some((4.0 - u * u - v * v).sqrt() - 2.0)
    });
    // ground truth adds a 2 mm wrinkle with a 12 px period
    let amplitude = 0.002;
    let period = 12.0;
    let mut truth_depth = coarse.clone();
    for y in 0..size {
        for x in 0..size {
            let w = amplitude * (std::f64::consts::TAU * x as f64 / period).sin();
            let v = truth_depth.get(x, y).unwrap() + w;
            truth_depth.set(x, y, v);
        }
    }
    let image = shading::render_shading(&truth_depth, &camera, &lighting, &albedo);
    let problem = ShadingProblem::new(image, albedo, coarse.clone(), camera)?;

    let start = std::time::Instant::now();
    let refined = shading::refine_depth(&problem, &lighting)?;
    println!(
        "refined in {:.2} s, {} accepted steps, converged: {}",
        start.elapsed().as_secs_f64(),
        refined.energy_trace.len() - 1,
        refined.converged
    );

    // recovered wrinkle amplitude via a sinusoid fit along x
    let (mut s_sin, mut s_cos, mut n) = (0.0, 0.0, 0usize);
    for y in 4..size - 4 {
        for x in 4..size - 4 {
            let d = refined.depth.get(x, y).unwrap() - coarse.get(x, y).unwrap();
            let phase = std::f64::consts::TAU * x as f64 / period;
            s_sin += d * phase.sin();
            s_cos += d * phase.cos();
            n += 1;
        }
    }
    let recovered = ((2.0 * s_sin / n as f64).powi(2) + (2.0 * s_cos / n as f64).powi(2)).sqrt();
    println!(
        "wrinkle amplitude: {:.3} mm recovered of {:.3} mm ({:.0}%)",
        recovered * 1e3,
        amplitude * 1e3,
        recovered / amplitude * 100.0
    );

    let magnified = shading::magnify_details(&refined.depth, &coarse, 10.0)?;
    pfm::save(&coarse, format!("{out}/coarse.pfm"))?;
    pfm::save(&refined.depth, format!("{out}/refined.pfm"))?;
    pfm::save(&magnified, format!("{out}/magnified_x10.pfm"))?;
    println!("wrote depth maps to {out}/");
    Ok(())
}
