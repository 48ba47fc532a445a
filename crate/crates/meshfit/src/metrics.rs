//! Accuracy metrics: silhouette IoU, 2D joint error, and 3D surface error
//! (full and visible-part variants).

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::camera::WeakPerspectiveCamera;
use crate::error::{Error, Result};
use crate::maps::Mask;
use crate::mesh::TriMesh;
use crate::raster;
use crate::spatial::KdTree;

/// One evaluated image/mesh pair. Fields are `None` when the corresponding
/// ground truth was not supplied.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub sil_iou: Option<f64>,
    pub joint_err_px: Option<f64>,
    pub per_joint_px: Option<Vec<Option<f64>>>,
    pub err3d_full_mm: Option<f64>,
    pub err3d_vis_mm: Option<f64>,
    /// Ground-truth vertices used by the full / visible 3D error.
    pub vertices_full: Option<usize>,
    pub vertices_visible: Option<usize>,
}

impl MetricReport {
    /// CSV header matching the batch-report column layout.
    pub fn csv_header() -> &'static str {
        "name,sil IoU,2D joint err,3D err full,3D err vis"
    }

    pub fn csv_row(&self, name: &str) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => String::new(),
        };
        format!(
            "{name},{},{},{},{}",
            fmt(self.sil_iou),
            fmt(self.joint_err_px),
            fmt(self.err3d_full_mm),
            fmt(self.err3d_vis_mm)
        )
    }
}

/// Intersection over union of two masks; 1.0 when both are empty.
pub fn silhouette_iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.check_size(b.width(), b.height())?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&pa, &pb) in a.pixels().iter().zip(b.pixels()) {
        if pa && pb {
            inter += 1;
        }
        if pa || pb {
            union += 1;
        }
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Mean Euclidean pixel distance over valid joints, plus the per-joint
/// breakdown (None where the annotation is invalid).
pub fn joint_error_2d(
    predicted: &[Point2<f64>],
    annotated: &[Option<Point2<f64>>],
) -> Result<(f64, Vec<Option<f64>>)> {
    assert_eq!(predicted.len(), annotated.len());
    let per_joint: Vec<Option<f64>> = predicted
        .iter()
        .zip(annotated)
        .map(|(p, a)| a.map(|a| (p - a).norm()))
        .collect();
    let valid: Vec<f64> = per_joint.iter().filter_map(|&d| d).collect();
    if valid.is_empty() {
        return Err(Error::NoValidJoints);
    }
    Ok((valid.iter().sum::<f64>() / valid.len() as f64, per_joint))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Every ground-truth vertex.
    Full,
    /// Only ground-truth vertices visible from the input viewpoint
    /// (self-occlusion of the ground-truth mesh itself).
    Visible,
}

/// Mean distance (millimeters) from each ground-truth vertex to its nearest
/// predicted vertex. Inputs are in meters. Returns the error and the number
/// of ground-truth vertices used.
pub fn error_3d(
    predicted: &TriMesh,
    ground_truth: &TriMesh,
    mode: ErrorMode,
    camera: Option<&WeakPerspectiveCamera>,
) -> Result<(f64, usize)> {
    let selected: Vec<usize> = match mode {
        ErrorMode::Full => (0..ground_truth.vertex_count()).collect(),
        ErrorMode::Visible => {
            let camera = camera.ok_or_else(|| {
                Error::Other("visible-mode 3D error needs a camera".to_string())
            })?;
            let maps = raster::rasterize(ground_truth, camera);
            (0..ground_truth.vertex_count())
                .filter(|&i| maps.vertex_visibility[i])
                .collect()
        }
    };
    if selected.is_empty() {
        return Err(Error::NoVisibleVertices);
    }
    let tree = KdTree::build(predicted.vertices());
    let total: f64 = selected
        .iter()
        .map(|&i| tree.nearest(&ground_truth.vertices()[i]).1)
        .sum();
    Ok((total / selected.len() as f64 * 1000.0, selected.len()))
}
