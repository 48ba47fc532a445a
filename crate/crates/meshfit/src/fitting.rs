//! The hierarchical refinement pipeline: joint stage, silhouette-anchor
//! stage, and per-vertex depth stage, each expressed as Laplacian handle
//! deformations driven directly by the 2D evidence.

use nalgebra::{Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::camera::WeakPerspectiveCamera;
use crate::config::FitConfig;
use crate::deform::{self, DeformProblem, HandleConstraint};
use crate::error::{Error, Result};
use crate::handles::{
    self, AnchorHandle, JointHandleGroup, JointName, ANCHOR_SEARCH_RADIUS_M,
};
use crate::laplacian::LaplacianOperator;
use crate::maps::{Mask, ScalarMap};
use crate::mesh::TriMesh;
use crate::metrics;
use crate::raster;
use crate::shading::{self, Albedo, SHLighting, ShadingProblem};

/// Pipeline progress marker; stages only advance in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    JointDone,
    AnchorDone,
    VertexDone,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::JointDone => "joint_done",
            Stage::AnchorDone => "anchor_done",
            Stage::VertexDone => "vertex_done",
        }
    }
}

/// 2D residual from a projected mesh joint to its annotated position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointResidual {
    pub joint_name: JointName,
    pub motion_2d: Vector2<f64>,
}

/// Ground-truth joint pixels in `JointName::ALL` order; `None` marks an
/// invalid/missing annotation.
pub type JointObservations = [Option<Point2<f64>>; 10];

/// Metrics recorded after each pipeline stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageSnapshot {
    pub stage: String,
    pub sil_iou: Option<f64>,
    pub joint_err_px: Option<f64>,
}

/// The evolving fit.
#[derive(Debug, Clone)]
pub struct FitState {
    pub mesh: TriMesh,
    pub camera: WeakPerspectiveCamera,
    pub stage: Stage,
    pub snapshots: Vec<StageSnapshot>,
}

impl FitState {
    pub fn new(mesh: TriMesh, camera: WeakPerspectiveCamera) -> FitState {
        FitState {
            mesh,
            camera,
            stage: Stage::Initial,
            snapshots: Vec::new(),
        }
    }

    fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::StageOrder {
                expected: expected.name(),
                actual: self.stage.name(),
            });
        }
        Ok(())
    }

    /// Record metrics for the current mesh under the given ground truth.
    pub fn snapshot(
        &mut self,
        label: &str,
        gt_silhouette: Option<&Mask>,
        gt_joints: Option<(&JointObservations, &[JointHandleGroup])>,
    ) {
        let sil_iou = gt_silhouette.map(|gt| {
            let maps = raster::rasterize(&self.mesh, &self.camera);
            metrics::silhouette_iou(&maps.silhouette, gt).unwrap_or(0.0)
        });
        let joint_err_px = gt_joints.and_then(|(obs, groups)| {
            let predicted = projected_joints(&self.mesh, &self.camera, groups).ok()?;
            metrics::joint_error_2d(&predicted, obs).ok().map(|(m, _)| m)
        });
        self.snapshots.push(StageSnapshot {
            stage: label.to_string(),
            sil_iou,
            joint_err_px,
        });
    }
}

/// Projected joint-group centers in group order.
pub fn projected_joints(
    mesh: &TriMesh,
    camera: &WeakPerspectiveCamera,
    groups: &[JointHandleGroup],
) -> Result<Vec<Point2<f64>>> {
    Ok(handles::joint_positions(mesh, groups)?
        .iter()
        .map(|p| camera.project(p))
        .collect())
}

/// Residuals for every validly annotated joint.
pub fn joint_residuals(
    mesh: &TriMesh,
    camera: &WeakPerspectiveCamera,
    groups: &[JointHandleGroup],
    observations: &JointObservations,
) -> Result<Vec<JointResidual>> {
    let projected = projected_joints(mesh, camera, groups)?;
    Ok(groups
        .iter()
        .zip(&projected)
        .filter_map(|(g, p)| {
            observations[g.joint_name.index()].map(|gt| JointResidual {
                joint_name: g.joint_name,
                motion_2d: gt - p,
            })
        })
        .collect())
}

/// Joint stage: move every member vertex of each annotated group by the
/// in-plane lift of its 2D residual (`(du, dv)/scale`, zero depth change),
/// as weighted Laplacian handles.
pub fn joint_stage(
    mut state: FitState,
    observations: &JointObservations,
    groups: &[JointHandleGroup],
    weight: f64,
) -> Result<FitState> {
    state.expect_stage(Stage::Initial)?;
    let residuals = joint_residuals(&state.mesh, &state.camera, groups, observations)?;
    if residuals.is_empty() {
        return Err(Error::NoValidJoints);
    }

    let mut constraints = Vec::new();
    for r in &residuals {
        let group = groups
            .iter()
            .find(|g| g.joint_name == r.joint_name)
            .expect("residual names come from groups");
        let lift = nalgebra::Vector3::new(
            r.motion_2d.x / state.camera.scale,
            r.motion_2d.y / state.camera.scale,
            0.0,
        );
        for &v in &group.vertex_indices {
            constraints.push(HandleConstraint {
                vertex_index: v,
                target: state.mesh.vertices()[v] + lift,
                weight,
            });
        }
    }
    let laplacian = LaplacianOperator::from_mesh(&state.mesh)?;
    state.mesh = deform::solve_deform(&DeformProblem::new(&state.mesh, &laplacian, constraints))?;
    state.stage = Stage::JointDone;
    Ok(state)
}

/// Sampling step along the projected normal, pixels.
pub const MARCH_STEP_PX: f64 = 0.5;

/// The measured mismatch band at a silhouette boundary crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchRun {
    /// Consecutive mismatched samples in the band (step `MARCH_STEP_PX`).
    pub samples: usize,
    /// +1 when the band is ground-truth-but-not-mesh (the mesh must grow
    /// along +normal), -1 when mesh-but-not-ground-truth (shrink).
    pub sign: f64,
}

impl MismatchRun {
    pub fn length_px(&self) -> f64 {
        self.samples as f64 * MARCH_STEP_PX
    }
}

/// Sample a mask along `start + t * dir`, nearest-pixel lookup, one entry
/// per `MARCH_STEP_PX` step; stops at the image border or after `max_px`.
fn line_samples(
    mesh_sil: &Mask,
    gt_sil: &Mask,
    start: Point2<f64>,
    dir: Vector2<f64>,
    max_px: f64,
) -> Vec<(bool, bool)> {
    let steps = (max_px / MARCH_STEP_PX).floor() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let p = start + dir * (j as f64 * MARCH_STEP_PX);
        let (x, y) = (p.x.floor() as i64, p.y.floor() as i64);
        if x < 0 || y < 0 || x >= mesh_sil.width() as i64 || y >= mesh_sil.height() as i64 {
            break;
        }
        out.push((mesh_sil.get(x, y), gt_sil.get(x, y)));
    }
    out
}

/// Measure the silhouette-mismatch band along the projected normal line
/// through `start`:
///
/// 1. find the nearest mesh-silhouette boundary crossing along
///    `start ± t * dir` (ties prefer the +dir side), within `max_px`;
/// 2. the mismatched side of that crossing is the band; count its
///    consecutive mismatched samples (mesh XOR ground truth);
/// 3. the band's mask pattern gives the sign (+ grow along +dir, - shrink).
///
/// Returns None when there is no crossing in range or no mismatch at the
/// crossing.
pub fn mismatch_segment(
    mesh_sil: &Mask,
    gt_sil: &Mask,
    start: Point2<f64>,
    dir: Vector2<f64>,
    max_px: f64,
) -> Option<MismatchRun> {
    let forward = line_samples(mesh_sil, gt_sil, start, dir, max_px);
    let backward = line_samples(mesh_sil, gt_sil, start, -dir, max_px);
    if forward.is_empty() {
        return None; // start pixel outside the image
    }
    // one combined line: backward samples reversed (dropping the duplicated
    // start sample), then the forward samples
    let mut line: Vec<(bool, bool)> = backward.iter().skip(1).rev().copied().collect();
    let start_idx = line.len();
    line.extend(forward.iter().copied());
    let mesh_at_start = line[start_idx].0;

    // nearest mesh-silhouette crossing, ties preferring the +dir side
    let mut cross = None;
    for k in 1..line.len() {
        let f = start_idx + k;
        if f < line.len() && line[f].0 != mesh_at_start {
            cross = Some(f);
            break;
        }
        if start_idx >= k && line[start_idx - k].0 != mesh_at_start {
            cross = Some(start_idx - k);
            break;
        }
        if f >= line.len() && start_idx < k {
            break;
        }
    }
    let c = cross?;
    let away: isize = if c >= start_idx { 1 } else { -1 };

    let mismatch = |s: (bool, bool)| s.0 != s.1;
    let sign_of = |s: (bool, bool)| if s.1 && !s.0 { 1.0 } else { -1.0 };
    let count_from = |i: isize, step: isize| -> usize {
        let mut n = 0usize;
        let mut j = i;
        while j >= 0 && (j as usize) < line.len() && mismatch(line[j as usize]) {
            n += 1;
            j += step;
        }
        n
    };

    let c = c as isize;
    if mismatch(line[c as usize]) {
        // band lies beyond the crossing
        Some(MismatchRun {
            samples: count_from(c, away),
            sign: sign_of(line[c as usize]),
        })
    } else if mismatch(line[(c - away) as usize]) {
        // band lies on the near side of the crossing (may extend past the
        // start point)
        Some(MismatchRun {
            samples: count_from(c - away, -away),
            sign: sign_of(line[(c - away) as usize]),
        })
    } else {
        None
    }
}

/// Anchor oracle: measure each anchor's movement from the silhouette
/// mismatch along its projected normal direction. Anchors that project
/// off-image, lie farther than `margin_px` from the mesh silhouette
/// boundary, have a view-aligned normal, or see no mismatch are inactive.
/// Movements are clamped to the 0.1 m search radius.
pub fn anchor_oracle(
    mesh: &TriMesh,
    camera: &WeakPerspectiveCamera,
    gt_silhouette: &Mask,
    anchors: &[AnchorHandle],
    margin_px: f64,
) -> Result<Vec<AnchorHandle>> {
    gt_silhouette.check_size(camera.width(), camera.height())?;
    let maps = raster::rasterize(mesh, camera);
    let mesh_sil = &maps.silhouette;
    let boundary = mesh_sil.boundary_pixels();
    let normals = mesh.vertex_normals();
    let max_px = ANCHOR_SEARCH_RADIUS_M * camera.scale;

    let result = anchors
        .iter()
        .map(|a| {
            let mut out = AnchorHandle {
                vertex_index: a.vertex_index,
                constraint_normal: normals[a.vertex_index],
                active: false,
                movement: 0.0,
            };
            let p2 = camera.project(&mesh.vertices()[a.vertex_index]);
            if !camera.contains_pixel(&p2) {
                return out;
            }
            let near_boundary = boundary.iter().any(|&(bx, by)| {
                let c = Point2::new(bx as f64 + 0.5, by as f64 + 0.5);
                (c - p2).norm() <= margin_px
            });
            if !near_boundary {
                return out;
            }
            let dir2 = camera.project_direction(&out.constraint_normal);
            if dir2.norm() < 1e-9 {
                return out; // normal along the view axis: no silhouette motion
            }
            let dir2 = dir2.normalize();

            if let Some(run) = mismatch_segment(mesh_sil, gt_silhouette, p2, dir2, max_px) {
                let movement = (run.sign * run.length_px() / camera.scale)
                    .clamp(-ANCHOR_SEARCH_RADIUS_M, ANCHOR_SEARCH_RADIUS_M);
                if movement != 0.0 {
                    out.active = true;
                    out.movement = movement;
                }
            }
            out
        })
        .collect();
    Ok(result)
}

/// Anchor stage: oracle + normal-constrained deform, iterated while the
/// silhouette IoU improves by more than 1e-3 (at most `iters` rounds).
/// A round that would decrease the IoU is reverted, so the stage never
/// lowers the IoU.
pub fn anchor_stage(
    mut state: FitState,
    gt_silhouette: &Mask,
    anchors: &mut Vec<AnchorHandle>,
    config: &FitConfig,
) -> Result<FitState> {
    state.expect_stage(Stage::JointDone)?;
    gt_silhouette.check_size(state.camera.width(), state.camera.height())?;
    let laplacian = LaplacianOperator::from_mesh(&state.mesh)?;

    let mut iou = {
        let maps = raster::rasterize(&state.mesh, &state.camera);
        metrics::silhouette_iou(&maps.silhouette, gt_silhouette)?
    };

    for _ in 0..config.anchor_iters.max(1) {
        let updated = anchor_oracle(
            &state.mesh,
            &state.camera,
            gt_silhouette,
            anchors,
            config.anchor_margin_px,
        )?;
        *anchors = updated;
        debug_assert!(anchors
            .iter()
            .all(|a| a.movement.abs() <= ANCHOR_SEARCH_RADIUS_M && (a.active || a.movement == 0.0)));
        if anchors.iter().all(|a| !a.active) {
            break;
        }
        let candidate =
            deform::deform_along_normals(&state.mesh, &laplacian, anchors, config.anchor_weight)?;
        let candidate_iou = {
            let maps = raster::rasterize(&candidate, &state.camera);
            metrics::silhouette_iou(&maps.silhouette, gt_silhouette)?
        };
        if candidate_iou < iou {
            break; // revert: keep the previous mesh
        }
        let gain = candidate_iou - iou;
        state.mesh = candidate;
        iou = candidate_iou;
        if gain <= 1e-3 {
            break;
        }
    }
    state.stage = Stage::AnchorDone;
    Ok(state)
}

/// Handle weight used for the per-vertex depth constraints.
pub const VERTEX_HANDLE_WEIGHT: f64 = 1.0;

/// Vertex stage: subdivide, then pull every visible vertex along the view
/// axis to the refined depth sampled at its projected pixel. Occluded
/// vertices and vertices without a full bilinear depth footprint stay
/// unconstrained, so the projected silhouette is unchanged.
pub fn vertex_stage(mut state: FitState, refined_depth: &ScalarMap) -> Result<FitState> {
    state.expect_stage(Stage::AnchorDone)?;
    refined_depth.check_size(state.camera.width(), state.camera.height())?;

    let subdivided = state.mesh.subdivide_midpoint();
    let maps = raster::rasterize(&subdivided, &state.camera);

    let mut constraints = Vec::new();
    for (i, p) in subdivided.vertices().iter().enumerate() {
        if !maps.vertex_visibility[i] {
            continue;
        }
        let q = state.camera.project(p);
        if let Some(depth) = refined_depth.bilinear(q.x, q.y) {
            constraints.push(HandleConstraint {
                vertex_index: i,
                target: Point3::new(p.x, p.y, depth),
                weight: VERTEX_HANDLE_WEIGHT,
            });
        }
    }

    state.mesh = if constraints.is_empty() {
        subdivided
    } else {
        let laplacian = LaplacianOperator::from_mesh(&subdivided)?;
        deform::solve_deform(&DeformProblem::new(&subdivided, &laplacian, constraints))?
    };
    state.stage = Stage::VertexDone;
    Ok(state)
}

/// Ground-truth evidence for one fit.
#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub joints_2d: Option<JointObservations>,
    pub joint_groups: Option<Vec<JointHandleGroup>>,
    /// Vertices excluded from anchor selection.
    pub excluded: BTreeSet<usize>,
    pub silhouette: Option<Mask>,
    /// Grayscale intensity in [0, 1] for the shading refinement.
    pub image: Option<ScalarMap>,
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub state: FitState,
    /// `(stage label, mesh)` for each executed deformation stage.
    pub stage_meshes: Vec<(String, TriMesh)>,
    pub report: FitReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub snapshots: Vec<StageSnapshot>,
    /// Stages that did not run, as `"stage: reason"`.
    pub skipped: Vec<String>,
    pub lighting: Option<SHLighting>,
    pub config: FitConfig,
}

/// Run the enabled stages in order, collecting per-stage meshes and metric
/// snapshots. Disabled or under-specified stages are recorded as skipped.
pub fn run_pipeline(
    initial_mesh: TriMesh,
    camera: WeakPerspectiveCamera,
    inputs: &PipelineInputs,
    config: &FitConfig,
) -> Result<PipelineResult> {
    let mut state = FitState::new(initial_mesh, camera);
    let mut stage_meshes = Vec::new();
    let mut skipped = Vec::new();
    let mut lighting = None;

    let gt_joints = match (&inputs.joints_2d, &inputs.joint_groups) {
        (Some(obs), Some(groups)) => Some((obs, groups.as_slice())),
        _ => None,
    };

    state.snapshot("initial", inputs.silhouette.as_ref(), gt_joints);

    // joint stage
    if !config.joint_enabled {
        skipped.push("joint: disabled".to_string());
        state.stage = Stage::JointDone;
    } else if let Some((obs, groups)) = gt_joints {
        state = joint_stage(state, obs, groups, config.joint_weight)
            .map_err(|e| Error::Other(format!("joint stage: {e}")))?;
        stage_meshes.push(("joint".to_string(), state.mesh.clone()));
        state.snapshot("joint", inputs.silhouette.as_ref(), gt_joints);
    } else {
        skipped.push("joint: no joint annotations".to_string());
        state.stage = Stage::JointDone;
    }

    // anchor stage
    if !config.anchor_enabled {
        skipped.push("anchor: disabled".to_string());
        state.stage = Stage::AnchorDone;
    } else if let Some(sil) = &inputs.silhouette {
        let candidates = state.mesh.vertex_count() - inputs.excluded.len();
        let count = config.anchor_count.min(candidates);
        let mut anchors =
            handles::select_anchor_handles(&state.mesh, &inputs.excluded, count, config.seed)?;
        state = anchor_stage(state, sil, &mut anchors, config)
            .map_err(|e| Error::Other(format!("anchor stage: {e}")))?;
        stage_meshes.push(("anchor".to_string(), state.mesh.clone()));
        state.snapshot("anchor", inputs.silhouette.as_ref(), gt_joints);
    } else {
        skipped.push("anchor: no silhouette".to_string());
        state.stage = Stage::AnchorDone;
    }

    // shading refinement + vertex stage
    if !config.vertex_enabled {
        skipped.push("vertex: disabled".to_string());
        state.stage = Stage::VertexDone;
    } else if let Some(image) = &inputs.image {
        let coarse = raster::rasterize(&state.mesh, &state.camera).depth;
        let mut problem = ShadingProblem::new(
            image.clone(),
            Albedo::Constant(config.albedo),
            coarse.clone(),
            state.camera,
        )
        .map_err(|e| Error::Other(format!("vertex stage: {e}")))?;
        problem.weights = config.shading;
        problem.gn_iters = config.gn_iters;
        let estimated =
            shading::estimate_lighting(&problem).map_err(|e| Error::Other(format!("vertex stage: {e}")))?;
        let refined = shading::refine_depth(&problem, &estimated)
            .map_err(|e| Error::Other(format!("vertex stage: {e}")))?;
        let magnified = shading::magnify_details(&refined.depth, &coarse, config.magnify_factor)?;
        lighting = Some(estimated);
        state = vertex_stage(state, &magnified)
            .map_err(|e| Error::Other(format!("vertex stage: {e}")))?;
        stage_meshes.push(("vertex".to_string(), state.mesh.clone()));
        state.snapshot("vertex", inputs.silhouette.as_ref(), gt_joints);
    } else {
        skipped.push("vertex: no image".to_string());
        state.stage = Stage::VertexDone;
    }

    let report = FitReport {
        snapshots: state.snapshots.clone(),
        skipped,
        lighting,
        config: config.clone(),
    };
    Ok(PipelineResult {
        state,
        stage_meshes,
        report,
    })
}

/// Write per-stage OBJ meshes (`<base>_joint.obj`, ...) and the JSON report
/// (`<base>_report.json`) into `out_dir`.
pub fn write_outputs(
    result: &PipelineResult,
    out_dir: impl AsRef<std::path::Path>,
    base: &str,
) -> Result<Vec<std::path::PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (label, mesh) in &result.stage_meshes {
        let path = out_dir.join(format!("{base}_{label}.obj"));
        crate::io::obj::save(mesh, &path)?;
        written.push(path);
    }
    let report_path = out_dir.join(format!("{base}_report.json"));
    let json = serde_json::to_string_pretty(&result.report).expect("serializable report");
    std::fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
    written.push(report_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use nalgebra::Vector3;

    fn camera_224(scale: f64) -> WeakPerspectiveCamera {
        WeakPerspectiveCamera::new(scale, [112.0, 112.0], [224, 224]).unwrap()
    }

    /// Disc mask of the given radius (pixels) centered in a 224x224 image.
    fn disc_mask(radius_px: f64) -> Mask {
        let mut m = Mask::new(224, 224);
        for y in 0..224 {
            for x in 0..224 {
                let dx = x as f64 + 0.5 - 112.0;
                let dy = y as f64 + 0.5 - 112.0;
                if dx * dx + dy * dy <= radius_px * radius_px {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    fn sphere_state(radius_m: f64, scale: f64) -> (FitState, Vec<AnchorHandle>) {
        let mesh = primitives::ellipsoid(
            &primitives::icosphere(3),
            Vector3::new(radius_m, radius_m, radius_m),
        );
        let anchors =
            handles::select_anchor_handles(&mesh, &BTreeSet::new(), 200, 7).unwrap();
        let mut state = FitState::new(mesh, camera_224(scale));
        state.stage = Stage::JointDone;
        (state, anchors)
    }

    #[test]
    fn joint_stage_zero_motion_is_identity() {
        let mesh = primitives::ellipsoid(
            &primitives::icosphere(2),
            Vector3::new(0.2, 0.8, 0.15),
        );
        let cam = camera_224(100.0);
        let seeds: Vec<(JointName, Point3<f64>)> = JointName::ALL
            .iter()
            .map(|&n| {
                let i = n.index() as f64;
                (n, Point3::new(0.0, 0.7 - 0.15 * i, 0.1))
            })
            .collect();
        let meta =
            handles::make_template_metadata(&mesh, &seeds, 8, &[], 0.0).unwrap();
        let obs: JointObservations = {
            let projected = projected_joints(&mesh, &cam, &meta.groups).unwrap();
            std::array::from_fn(|i| Some(projected[i]))
        };
        let state = FitState::new(mesh.clone(), cam);
        let out = joint_stage(state, &obs, &meta.groups, 10.0).unwrap();
        assert_eq!(out.stage, Stage::JointDone);
        let worst = mesh
            .vertices()
            .iter()
            .zip(out.mesh.vertices())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
    }

    /// Group of the `count` vertices nearest a seed point.
    fn group_near(
        mesh: &TriMesh,
        name: JointName,
        seed: Point3<f64>,
        count: usize,
    ) -> JointHandleGroup {
        let mut order: Vec<usize> = (0..mesh.vertex_count()).collect();
        order.sort_by(|&a, &b| {
            let da = (mesh.vertices()[a] - seed).norm();
            let db = (mesh.vertices()[b] - seed).norm();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        JointHandleGroup {
            joint_name: name,
            vertex_indices: order.into_iter().take(count).collect(),
        }
    }

    #[test]
    fn joint_stage_moves_single_joint_by_lifted_offset() {
        let mesh = primitives::icosphere(3);
        let cam = camera_224(100.0);
        let group = group_near(&mesh, JointName::Head, Point3::new(0.0, 1.0, 0.0), 15);
        let before = projected_joints(&mesh, &cam, &[group.clone()]).unwrap()[0];

        let mut obs: JointObservations = [None; 10];
        obs[JointName::Head.index()] = Some(before + Vector2::new(10.0, 0.0));

        let state = FitState::new(mesh.clone(), cam);
        let out = joint_stage(state, &obs, &[group.clone()], 10.0).unwrap();

        let center_before = handles::joint_positions(&mesh, &[group.clone()]).unwrap()[0];
        let center_after = handles::joint_positions(&out.mesh, &[group.clone()]).unwrap()[0];
        let moved = center_after - center_before;
        assert!((moved.x - 0.1).abs() < 0.01, "moved {moved:?}");
        assert!(moved.y.abs() < 0.01 && moved.z.abs() < 1e-6);

        let after = projected_joints(&out.mesh, &cam, &[group]).unwrap()[0];
        let residual = (obs[JointName::Head.index()].unwrap() - after).norm();
        assert!(residual < 1.0, "residual {residual} px");
    }

    #[test]
    fn joint_stage_requires_valid_joint() {
        let mesh = primitives::icosphere(1);
        let state = FitState::new(mesh, camera_224(100.0));
        let obs: JointObservations = [None; 10];
        assert!(matches!(
            joint_stage(state, &obs, &[], 10.0),
            Err(Error::NoValidJoints)
        ));
    }

    #[test]
    fn oracle_identical_masks_all_inactive() {
        let (state, anchors) = sphere_state(0.5, 100.0);
        let maps = raster::rasterize(&state.mesh, &state.camera);
        let out = anchor_oracle(
            &state.mesh,
            &state.camera,
            &maps.silhouette,
            &anchors,
            20.0,
        )
        .unwrap();
        for a in &out {
            assert!(!a.active);
            assert_eq!(a.movement, 0.0);
        }
    }

    #[test]
    fn oracle_growing_disc_hits_radius_cap() {
        // mesh sphere projects to a ~50 px disc; gt is a 60 px disc, so the
        // 10 px gap equals the 0.1 m search radius at 100 px/m
        let (state, anchors) = sphere_state(0.5, 100.0);
        let gt = disc_mask(60.0);
        let out =
            anchor_oracle(&state.mesh, &state.camera, &gt, &anchors, 20.0).unwrap();
        // the search window is centered on the anchor, so only anchors on
        // the rim itself see the whole 10 px band before the radius cap
        let mut checked = 0;
        for a in &out {
            if !a.active {
                continue;
            }
            let p = state.mesh.vertices()[a.vertex_index];
            let planar = (p.x * p.x + p.y * p.y).sqrt();
            if planar < 0.48 {
                continue;
            }
            let dir = state.camera.project_direction(&a.constraint_normal);
            if dir.norm() < 0.9 * state.camera.scale {
                continue;
            }
            checked += 1;
            assert!(
                a.movement >= 0.075 && a.movement <= ANCHOR_SEARCH_RADIUS_M + 1e-12,
                "movement {}",
                a.movement
            );
        }
        assert!(checked > 10, "only {checked} rim anchors checked");
    }

    #[test]
    fn oracle_shrinking_disc_negative_movement() {
        let (state, anchors) = sphere_state(0.5, 100.0);
        let gt = disc_mask(45.0);
        let out =
            anchor_oracle(&state.mesh, &state.camera, &gt, &anchors, 20.0).unwrap();
        let mut checked = 0;
        for a in &out {
            if !a.active {
                continue;
            }
            let p = state.mesh.vertices()[a.vertex_index];
            let planar = (p.x * p.x + p.y * p.y).sqrt();
            if planar < 0.45 {
                continue;
            }
            let dir = state.camera.project_direction(&a.constraint_normal);
            if dir.norm() < 0.7 * state.camera.scale {
                continue;
            }
            checked += 1;
            assert!(
                (-0.065..=-0.035).contains(&a.movement),
                "movement {}",
                a.movement
            );
        }
        assert!(checked > 20, "only {checked} rim anchors checked");
    }

    #[test]
    fn oracle_movements_always_within_radius() {
        use rand::{Rng, SeedableRng};
        let (state, anchors) = sphere_state(0.5, 100.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let mut gt = Mask::new(224, 224);
            for y in 0..224 {
                for x in 0..224 {
                    if rng.gen_bool(0.5) {
                        gt.set(x, y, true);
                    }
                }
            }
            let out =
                anchor_oracle(&state.mesh, &state.camera, &gt, &anchors, 20.0).unwrap();
            for a in &out {
                assert!(a.movement.abs() <= ANCHOR_SEARCH_RADIUS_M);
                if !a.active {
                    assert_eq!(a.movement, 0.0);
                }
            }
        }
    }

    /// Independent re-implementation of the mismatch-band rule working on
    /// plain sample vectors: grab every sample on the bidirectional line,
    /// locate the nearest mesh crossing, then measure the mismatched side.
    fn brute_force_segment(
        mesh_sil: &Mask,
        gt_sil: &Mask,
        start: Point2<f64>,
        dir: Vector2<f64>,
        max_px: f64,
    ) -> Option<(usize, f64)> {
        let sample_at = |t: f64| -> Option<(bool, bool)> {
            let p = start + dir * t;
            let (x, y) = (p.x.floor() as i64, p.y.floor() as i64);
            if x < 0 || y < 0 || x >= mesh_sil.width() as i64 || y >= mesh_sil.height() as i64 {
                return None;
            }
            Some((mesh_sil.get(x, y), gt_sil.get(x, y)))
        };
        let steps = (max_px / MARCH_STEP_PX).floor() as i64;
        // signed step index -> sample, truncated at image borders exactly
        // like the marcher (each direction stops at its first exit)
        let mut line = std::collections::BTreeMap::new();
        for j in 0..=steps {
            match sample_at(j as f64 * MARCH_STEP_PX) {
                Some(s) => {
                    line.insert(j, s);
                }
                None => break,
            }
        }
        for j in 1..=steps {
            match sample_at(-j as f64 * MARCH_STEP_PX) {
                Some(s) => {
                    line.insert(-j, s);
                }
                None => break,
            }
        }
        let &m0 = &line.get(&0)?.0;
        // nearest crossing by |index|, + side wins ties
        let mut cross: Option<i64> = None;
        for k in 1..=steps {
            if let Some(&(m, _)) = line.get(&k) {
                if m != m0 {
                    cross = Some(k);
                    break;
                }
            }
            if let Some(&(m, _)) = line.get(&-k) {
                if m != m0 {
                    cross = Some(-k);
                    break;
                }
            }
        }
        let c = cross?;
        let away = if c > 0 { 1i64 } else { -1 };
        let mismatch = |s: &(bool, bool)| s.0 != s.1;
        let sign_of = |s: &(bool, bool)| if s.1 && !s.0 { 1.0 } else { -1.0 };
        let count = |from: i64, step: i64| -> usize {
            let mut n = 0;
            let mut j = from;
            while let Some(s) = line.get(&j) {
                if !mismatch(s) {
                    break;
                }
                n += 1;
                j += step;
            }
            n
        };
        let at_c = line.get(&c).unwrap();
        if mismatch(at_c) {
            Some((count(c, away), sign_of(at_c)))
        } else {
            let near = line.get(&(c - away)).unwrap();
            if mismatch(near) {
                Some((count(c - away, -away), sign_of(near)))
            } else {
                None
            }
        }
    }

    #[test]
    fn segment_matches_brute_force_line_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
        let mut compared = 0usize;
        let mut nontrivial = 0usize;
        for _ in 0..50 {
            // random blobby masks: a few random rectangles each
            let mut a = Mask::new(64, 64);
            let mut b = Mask::new(64, 64);
            for mask in [&mut a, &mut b] {
                for _ in 0..rng.gen_range(1..4) {
                    let x0 = rng.gen_range(0..48);
                    let y0 = rng.gen_range(0..48);
                    let w = rng.gen_range(4..16);
                    let h = rng.gen_range(4..16);
                    for y in y0..(y0 + h).min(64) {
                        for x in x0..(x0 + w).min(64) {
                            mask.set(x, y, true);
                        }
                    }
                }
            }
            for _ in 0..40 {
                let start = Point2::new(rng.gen_range(0.0..64.0), rng.gen_range(0.0..64.0));
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let dir = Vector2::new(angle.cos(), angle.sin());
                let max_px = rng.gen_range(2.0..20.0);
                let ours = mismatch_segment(&a, &b, start, dir, max_px);
                let brute = brute_force_segment(&a, &b, start, dir, max_px);
                match (ours, brute) {
                    (None, None) => {}
                    (Some(r), Some((len, sign))) => {
                        assert_eq!(r.samples, len, "length mismatch");
                        assert_eq!(r.sign, sign);
                        nontrivial += 1;
                    }
                    (o, b) => panic!("disagreement: {o:?} vs {b:?}"),
                }
                compared += 1;
            }
        }
        assert!(compared >= 2000);
        assert!(nontrivial >= 100, "only {nontrivial} nontrivial agreements");
    }

    #[test]
    fn anchor_stage_noop_on_matching_silhouette() {
        let (state, mut anchors) = sphere_state(0.5, 100.0);
        let gt = raster::rasterize(&state.mesh, &state.camera).silhouette;
        let before = state.mesh.clone();
        let out = anchor_stage(state, &gt, &mut anchors, &FitConfig::default()).unwrap();
        assert_eq!(out.stage, Stage::AnchorDone);
        assert_eq!(out.mesh.vertices(), before.vertices());
    }

    #[test]
    fn anchor_stage_never_lowers_iou_on_noise() {
        use rand::{Rng, SeedableRng};
        let (state, mut anchors) = sphere_state(0.5, 100.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut gt = Mask::new(224, 224);
        for y in 0..224 {
            for x in 0..224 {
                if rng.gen_bool(0.3) {
                    gt.set(x, y, true);
                }
            }
        }
        let initial_iou = {
            let maps = raster::rasterize(&state.mesh, &state.camera);
            metrics::silhouette_iou(&maps.silhouette, &gt).unwrap()
        };
        let out = anchor_stage(state, &gt, &mut anchors, &FitConfig::default()).unwrap();
        let final_iou = {
            let maps = raster::rasterize(&out.mesh, &out.camera);
            metrics::silhouette_iou(&maps.silhouette, &gt).unwrap()
        };
        assert!(
            final_iou >= initial_iou - 1e-12,
            "IoU fell {initial_iou} -> {final_iou}"
        );
    }

    /// Gently curved frontal patch: no silhouette rim, so depth sampling is
    /// benign everywhere.
    fn patch_state() -> FitState {
        let mesh = primitives::grid_patch(30, 30, (-0.8, 0.8), (-0.8, 0.8), |x, y| {
            1.0 - 0.1 * (x * x + y * y)
        });
        let mut state = FitState::new(mesh, camera_224(100.0));
        state.stage = Stage::AnchorDone;
        state
    }

    #[test]
    fn vertex_stage_self_depth_is_near_identity() {
        let state = patch_state();
        let coarse = raster::rasterize(&state.mesh, &state.camera).depth;
        let expected = state.mesh.subdivide_midpoint();
        let out = vertex_stage(state, &coarse).unwrap();
        assert_eq!(out.stage, Stage::VertexDone);
        assert_eq!(out.mesh.vertex_count(), expected.vertex_count());
        let mut worst = 0.0f64;
        for (a, b) in expected.vertices().iter().zip(out.mesh.vertices()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-3, "worst displacement {worst}");
    }

    #[test]
    fn vertex_stage_shifts_visible_vertices_toward_viewer() {
        let state = patch_state();
        let coarse = raster::rasterize(&state.mesh, &state.camera).depth;
        let shifted = coarse.map_values(|z| z + 0.005);
        let subdivided = state.mesh.subdivide_midpoint();
        let vis = raster::rasterize(&subdivided, &state.camera).vertex_visibility;
        let out = vertex_stage(state, &shifted).unwrap();
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, (a, b)) in subdivided
            .vertices()
            .iter()
            .zip(out.mesh.vertices())
            .enumerate()
        {
            if vis[i] {
                total += b.z - a.z;
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!((mean - 0.005).abs() < 0.001, "mean visible shift {mean}");
    }

    #[test]
    fn vertex_stage_moves_only_along_view_axis() {
        let (mut state, _) = sphere_state(0.5, 100.0);
        state.stage = Stage::AnchorDone;
        let coarse = raster::rasterize(&state.mesh, &state.camera).depth;
        let wavy = {
            let mut d = coarse.clone();
            for y in 0..224 {
                for x in 0..224 {
                    if let Some(v) = d.get(x, y) {
                        d.set(x, y, v + 0.003 * ((x as f64) / 9.0).sin());
                    }
                }
            }
            d
        };
        let subdivided = state.mesh.subdivide_midpoint();
        let out = vertex_stage(state, &wavy).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in subdivided.vertices().iter().zip(out.mesh.vertices()) {
            let lateral = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            worst = worst.max(lateral);
        }
        assert!(worst < 1e-3, "worst lateral motion {worst} m");
    }

    #[test]
    fn vertex_stage_size_mismatch_is_error() {
        let (mut state, _) = sphere_state(0.5, 100.0);
        state.stage = Stage::AnchorDone;
        let wrong = ScalarMap::new_invalid(64, 64);
        assert!(matches!(
            vertex_stage(state, &wrong),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn pipeline_all_disabled_is_identity_with_snapshot() {
        let mesh = primitives::icosphere(2);
        let cam = camera_224(100.0);
        let mut config = FitConfig::default();
        config.joint_enabled = false;
        config.anchor_enabled = false;
        config.vertex_enabled = false;
        let inputs = PipelineInputs::default();
        let result = run_pipeline(mesh.clone(), cam, &inputs, &config).unwrap();
        assert_eq!(result.state.mesh.vertices(), mesh.vertices());
        assert_eq!(result.stage_meshes.len(), 0);
        assert_eq!(result.report.snapshots.len(), 1);
        assert_eq!(result.report.skipped.len(), 3);
        assert_eq!(result.state.stage, Stage::VertexDone);
    }
}
