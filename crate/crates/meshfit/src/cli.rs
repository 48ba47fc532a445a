//! Command-line interface. The `meshfit` binary is a thin wrapper around
//! [`run`]; tests invoke [`run`] directly.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::annotation::Annotation;
use crate::config::FitConfig;
use crate::error::Error;
use crate::fitting::{self, PipelineInputs};
use crate::handles;
use crate::io;
use crate::maps::ScalarMap;
use crate::metrics::{self, ErrorMode, MetricReport};
use crate::patches;
use crate::{dataset, raster};

#[derive(Parser)]
#[command(
    name = "meshfit",
    about = "Refine a coarse body mesh against 2D joints, silhouettes, and shading",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fitting pipeline over an annotation file or a directory of
    /// annotation files.
    Fit(FitArgs),
    /// Evaluate a predicted mesh (and optionally silhouettes/joints)
    /// against ground truth.
    Eval(EvalArgs),
    /// Sample candidate views of a mesh and render silhouette + depth +
    /// camera per view.
    GenViews(GenViewsArgs),
    /// Remove faces not seen from any of 6 orthographic directions.
    CleanMesh(CleanMeshArgs),
    /// Export handle-centered training patches with oracle labels.
    ExportPatches(ExportPatchesArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Annotation JSON file, or a directory of them.
    #[arg(long)]
    annotation: PathBuf,
    /// Output directory for per-stage meshes and reports.
    #[arg(long)]
    out: PathBuf,
    /// Template metadata JSON (joint groups + excluded vertices); falls
    /// back to the annotation's `template_meta` field.
    #[arg(long)]
    template_meta: Option<PathBuf>,
    /// Config file path or `key=value` override; repeatable.
    #[arg(long)]
    config: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted mesh (OBJ/PLY).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mesh (OBJ/PLY).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Annotation JSON providing the camera (for visible-part error, the
    /// silhouette, and joints).
    #[arg(long)]
    annotation: Option<PathBuf>,
    /// Template metadata for projecting predicted joints.
    #[arg(long)]
    template_meta: Option<PathBuf>,
    /// Evaluate the predicted silhouette against this mask instead of the
    /// annotation's.
    #[arg(long)]
    gt_sil: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Append a CSV row (with header when creating the file).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Row name for the CSV output.
    #[arg(long, default_value = "eval")]
    name: String,
}

#[derive(Args)]
struct GenViewsArgs {
    /// Mesh to render (OBJ/PLY).
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Views sampled from the 54-candidate grid.
    #[arg(long, default_value_t = 6)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output image side length, pixels.
    #[arg(long, default_value_t = 224)]
    size: usize,
    /// Render every candidate view instead of sampling.
    #[arg(long, default_value_t = false)]
    all: bool,
}

#[derive(Args)]
struct CleanMeshArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Orthographic render resolution.
    #[arg(long, default_value_t = 512)]
    resolution: usize,
}

#[derive(Args)]
struct ExportPatchesArgs {
    /// Annotation JSON naming the image, mesh, camera, and ground truth.
    #[arg(long)]
    annotation: PathBuf,
    /// `joint` (64x64) or `anchor` (32x32).
    #[arg(long)]
    level: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    template_meta: Option<PathBuf>,
    #[arg(long)]
    config: Vec<String>,
}

/// Entry point; returns the process exit code (0 ok, 1 runtime failure,
/// 2 usage/config errors). Failures print a single machine-readable JSON
/// line to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::GenViews(args) => cmd_gen_views(args),
        Command::CleanMesh(args) => cmd_clean_mesh(args),
        Command::ExportPatches(args) => cmd_export_patches(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = match e {
                Error::UnknownConfigKey { .. } | Error::BadConfigValue { .. } => 2,
                _ => 1,
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "exit": code })
            );
            code
        }
    }
}

fn parse_config(overrides: &[String]) -> crate::Result<FitConfig> {
    let mut config = FitConfig::default();
    for spec in overrides {
        config.apply_override(spec)?;
    }
    Ok(config)
}

fn annotation_files(path: &Path) -> crate::Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Other(format!(
                "no .json annotations in {}",
                path.display()
            )));
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn cmd_fit(args: FitArgs) -> crate::Result<()> {
    let config = parse_config(&args.config)?;
    let directory_mode = args.annotation.is_dir();
    let files = annotation_files(&args.annotation)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut reports = Vec::new();
    for file in &files {
        let annotation = match Annotation::load(file) {
            Ok(a) => a,
            // a directory may hold non-annotation JSON (metadata, reports):
            // skip those with a warning instead of aborting the batch
            Err(e) if directory_mode => {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "warning": format!("skipping {}: {e}", file.display())
                    })
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        let mesh = annotation.load_initial_mesh()?;
        let silhouette = annotation.load_silhouette()?;
        let image = annotation.load_image_gray()?;

        let meta = match &args.template_meta {
            Some(p) => Some(handles::load_template_metadata(p, mesh.vertex_count())?),
            None => annotation.load_template_meta(mesh.vertex_count())?,
        };
        if let Some(sil) = &silhouette {
            let outcome = annotation.filter_outcome(Some(sil));
            if !outcome.passes() {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "warning": "annotation fails whole-body filter rules",
                        "annotation": file.display().to_string(),
                        "filter": outcome,
                    })
                );
            }
        }

        let inputs = PipelineInputs {
            joints_2d: Some(annotation.observations()),
            joint_groups: meta.as_ref().map(|m| m.groups.clone()),
            excluded: meta.as_ref().map(|m| m.excluded.clone()).unwrap_or_default(),
            silhouette,
            image,
        };
        let result = fitting::run_pipeline(mesh, annotation.camera, &inputs, &config)?;
        let base = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "fit".to_string());
        for (label, stage_mesh) in &result.stage_meshes {
            io::obj::save(stage_mesh, args.out.join(format!("{base}_{label}.obj")))?;
        }
        reports.push(serde_json::json!({
            "annotation": base,
            "report": result.report,
        }));
    }

    if reports.is_empty() {
        return Err(Error::Other(format!(
            "no loadable annotations under {}",
            args.annotation.display()
        )));
    }
    let report_path = args.out.join("report.json");
    let body = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0]).expect("serializable")
    } else {
        serde_json::to_string_pretty(&reports).expect("serializable")
    };
    std::fs::write(&report_path, body).map_err(|e| Error::io(&report_path, e))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> crate::Result<()> {
    let pred = io::load_mesh(&args.pred)?;
    let annotation = args.annotation.as_ref().map(Annotation::load).transpose()?;

    let mut report = MetricReport::default();

    if let Some(gt_path) = &args.gt {
        let gt = io::load_mesh(gt_path)?;
        let (full, n_full) = metrics::error_3d(&pred, &gt, ErrorMode::Full, None)?;
        report.err3d_full_mm = Some(full);
        report.vertices_full = Some(n_full);
        if let Some(a) = &annotation {
            let (vis, n_vis) = metrics::error_3d(&pred, &gt, ErrorMode::Visible, Some(&a.camera))?;
            report.err3d_vis_mm = Some(vis);
            report.vertices_visible = Some(n_vis);
        }
    }

    if let Some(a) = &annotation {
        let gt_sil = match &args.gt_sil {
            Some(p) => Some(crate::maps::Mask::load_png(p)?),
            None => a.load_silhouette()?,
        };
        if let Some(gt_sil) = gt_sil {
            let rendered = raster::rasterize(&pred, &a.camera).silhouette;
            report.sil_iou = Some(metrics::silhouette_iou(&rendered, &gt_sil)?);
        }
        let meta = match &args.template_meta {
            Some(p) => Some(handles::load_template_metadata(p, pred.vertex_count())?),
            None => a.load_template_meta(pred.vertex_count())?,
        };
        if let Some(meta) = meta {
            let predicted = fitting::projected_joints(&pred, &a.camera, &meta.groups)?;
            if let Ok((mean, per)) = metrics::joint_error_2d(&predicted, &a.observations()) {
                report.joint_err_px = Some(mean);
                report.per_joint_px = Some(per);
            }
        }
    }

    let json = serde_json::to_string_pretty(&report).expect("serializable");
    match &args.json {
        Some(p) => std::fs::write(p, json).map_err(|e| Error::io(p, e))?,
        None => println!("{json}"),
    }
    if let Some(csv_path) = &args.csv {
        let mut body = String::new();
        if !csv_path.exists() {
            body.push_str(MetricReport::csv_header());
            body.push('\n');
        }
        body.push_str(&report.csv_row(&args.name));
        body.push('\n');
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv_path)
            .map_err(|e| Error::io(csv_path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(csv_path, e))?;
    }
    Ok(())
}

fn cmd_gen_views(args: GenViewsArgs) -> crate::Result<()> {
    let mesh = io::load_mesh(&args.mesh)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let schedule = dataset::ViewSchedule {
        sample_count: args.count,
        seed: args.seed,
        ..dataset::ViewSchedule::default()
    };
    let views = if args.all {
        schedule.candidates()
    } else {
        schedule.sample_views()?
    };
    for (i, (az, el)) in views.iter().enumerate() {
        let view = dataset::render_view(&mesh, *az, *el, [args.size, args.size]);
        let stem = format!("view_{i:02}_az{az:03.0}_el{el:+03.0}");
        view.maps
            .silhouette
            .save_png(args.out.join(format!("{stem}_sil.png")))?;
        io::pfm::save(&view.maps.depth, args.out.join(format!("{stem}_depth.pfm")))?;
        let meta = serde_json::json!({
            "azimuth_deg": az,
            "elevation_deg": el,
            "camera": view.camera,
        });
        let meta_path = args.out.join(format!("{stem}.json"));
        std::fs::write(
            &meta_path,
            serde_json::to_string_pretty(&meta).expect("serializable"),
        )
        .map_err(|e| Error::io(&meta_path, e))?;
    }
    Ok(())
}

fn cmd_clean_mesh(args: CleanMeshArgs) -> crate::Result<()> {
    let mesh = io::load_mesh(&args.input)?;
    let cleaned = dataset::remove_inner_surface(&mesh, args.resolution)?;
    io::save_mesh(&cleaned, &args.output)
}

fn cmd_export_patches(args: ExportPatchesArgs) -> crate::Result<()> {
    let config = parse_config(&args.config)?;
    let annotation = Annotation::load(&args.annotation)?;
    let mesh = annotation.load_initial_mesh()?;
    let image = annotation
        .load_image_gray()?
        .unwrap_or_else(|| ScalarMap::from_fn(annotation.camera.width(), annotation.camera.height(), |_, _| Some(0.0)));
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let meta = match &args.template_meta {
        Some(p) => Some(handles::load_template_metadata(p, mesh.vertex_count())?),
        None => annotation.load_template_meta(mesh.vertex_count())?,
    };

    let set = match args.level.as_str() {
        "joint" => {
            let meta = meta.ok_or_else(|| {
                Error::Other("joint-level export needs template metadata".into())
            })?;
            patches::export_joint_patches(
                &image,
                &mesh,
                &annotation.camera,
                &meta.groups,
                &annotation.observations(),
            )?
        }
        "anchor" => {
            let gt_sil = annotation.load_silhouette()?.ok_or_else(|| {
                Error::Other("anchor-level export needs a silhouette".into())
            })?;
            let excluded = meta.map(|m| m.excluded).unwrap_or_default();
            let count = config
                .anchor_count
                .min(mesh.vertex_count() - excluded.len());
            let anchors =
                handles::select_anchor_handles(&mesh, &excluded, count, config.seed)?;
            patches::export_anchor_patches(
                &image,
                &mesh,
                &annotation.camera,
                &anchors,
                &gt_sil,
                config.anchor_margin_px,
            )?
        }
        other => {
            return Err(Error::Other(format!(
                "unknown patch level `{other}` (expected joint|anchor)"
            )))
        }
    };
    if set.rescaled {
        eprintln!(
            "{}",
            serde_json::json!({
                "warning": format!("image rescaled to {0}x{0} patch convention", patches::PATCH_IMAGE_SIZE)
            })
        );
    }

    let mut labels = Vec::new();
    for p in &set.patches {
        p.save_image_png(args.out.join(format!("{}.png", p.handle_name)))?;
        p.mesh_silhouette
            .save_png(args.out.join(format!("{}_sil.png", p.handle_name)))?;
        labels.push(serde_json::json!({
            "handle": p.handle_name,
            "center_px": p.center_px,
            "label": p.label,
            "off_image": p.off_image,
        }));
    }
    let labels_path = args.out.join("labels.json");
    std::fs::write(
        &labels_path,
        serde_json::to_string_pretty(&labels).expect("serializable"),
    )
    .map_err(|e| Error::io(&labels_path, e))?;
    Ok(())
}
