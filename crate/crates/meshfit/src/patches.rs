//! Handle-centered patch export: the training-pair interface for learned
//! joint/anchor predictors. Each patch crops the source image and the
//! mesh-projected silhouette around a handle and carries the oracle label
//! the predictor would be trained against.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::camera::WeakPerspectiveCamera;
use crate::error::Result;
use crate::fitting::{self, JointObservations};
use crate::handles::{AnchorHandle, JointHandleGroup};
use crate::maps::{Mask, ScalarMap};
use crate::mesh::TriMesh;
use crate::raster;

pub const JOINT_PATCH_SIZE: usize = 64;
pub const ANCHOR_PATCH_SIZE: usize = 32;
/// The image-side convention the patch sizes are defined against.
pub const PATCH_IMAGE_SIZE: usize = 224;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PatchLabel {
    /// 2D joint motion vector in pixels, None when the joint annotation is
    /// invalid.
    JointMotion(Option<[f64; 2]>),
    /// Signed anchor movement in meters along the normal; None when the
    /// anchor is inactive.
    AnchorMovement(Option<f64>),
}

#[derive(Debug, Clone)]
pub struct Patch {
    /// Joint name or anchor index, for file naming.
    pub handle_name: String,
    pub center_px: [f64; 2],
    /// Grayscale crop, zero-padded outside the image.
    pub image: ScalarMap,
    /// Mesh-silhouette crop.
    pub mesh_silhouette: Mask,
    pub label: PatchLabel,
    /// The handle projected outside the image entirely.
    pub off_image: bool,
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
    /// The input image was not 224x224 and was rescaled to the convention.
    pub rescaled: bool,
}

/// Rescale an image and camera to the 224x224 patch convention
/// (isotropic, zero-padded on the short side). Returns them untouched when
/// already conforming.
fn conform(
    image: &ScalarMap,
    camera: &WeakPerspectiveCamera,
) -> (ScalarMap, WeakPerspectiveCamera, bool) {
    let (w, h) = (image.width(), image.height());
    if w == PATCH_IMAGE_SIZE && h == PATCH_IMAGE_SIZE {
        return (image.clone(), *camera, false);
    }
    let s = PATCH_IMAGE_SIZE as f64 / w.max(h) as f64;
    let resized = ScalarMap::from_fn(PATCH_IMAGE_SIZE, PATCH_IMAGE_SIZE, |x, y| {
        let u = (x as f64 + 0.5) / s;
        let v = (y as f64 + 0.5) / s;
        Some(image.bilinear(u, v).unwrap_or(0.0))
    });
    let camera = WeakPerspectiveCamera {
        scale: camera.scale * s,
        translation: [camera.translation[0] * s, camera.translation[1] * s],
        image_size: [PATCH_IMAGE_SIZE, PATCH_IMAGE_SIZE],
    };
    (resized, camera, true)
}

fn crop_maps(
    image: &ScalarMap,
    mesh_sil: &Mask,
    center: Point2<f64>,
    size: usize,
) -> (ScalarMap, Mask) {
    let x0 = center.x.round() as i64 - size as i64 / 2;
    let y0 = center.y.round() as i64 - size as i64 / 2;
    let mut img = ScalarMap::new_invalid(size, size);
    let mut sil = Mask::new(size, size);
    for j in 0..size {
        for i in 0..size {
            let sx = x0 + i as i64;
            let sy = y0 + j as i64;
            // zero padding outside the source image
            let v = if sx >= 0 && sy >= 0 {
                image.get_checked(sx, sy).unwrap_or(0.0)
            } else {
                0.0
            };
            img.set(i, j, v);
            sil.set(i, j, mesh_sil.get(sx, sy));
        }
    }
    (img, sil)
}

/// One 64x64 patch per joint handle, labeled with the 2D motion vector
/// toward its annotation.
pub fn export_joint_patches(
    image: &ScalarMap,
    mesh: &TriMesh,
    camera: &WeakPerspectiveCamera,
    groups: &[JointHandleGroup],
    observations: &JointObservations,
) -> Result<PatchSet> {
    let (image, camera, rescaled) = conform(image, camera);
    let mesh_sil = raster::rasterize(mesh, &camera).silhouette;
    let centers = fitting::projected_joints(mesh, &camera, groups)?;
    let patches = groups
        .iter()
        .zip(&centers)
        .map(|(g, &center)| {
            let (img, sil) = crop_maps(&image, &mesh_sil, center, JOINT_PATCH_SIZE);
            let label = observations[g.joint_name.index()]
                .map(|gt| [gt.x - center.x, gt.y - center.y]);
            Patch {
                handle_name: g.joint_name.as_str().to_string(),
                center_px: [center.x, center.y],
                image: img,
                mesh_silhouette: sil,
                label: PatchLabel::JointMotion(label),
                off_image: !camera.contains_pixel(&center),
            }
        })
        .collect();
    Ok(PatchSet { patches, rescaled })
}

/// One 32x32 patch per anchor handle, labeled with the oracle movement
/// against the ground-truth silhouette.
pub fn export_anchor_patches(
    image: &ScalarMap,
    mesh: &TriMesh,
    camera: &WeakPerspectiveCamera,
    anchors: &[AnchorHandle],
    gt_silhouette: &Mask,
    margin_px: f64,
) -> Result<PatchSet> {
    let (image, camera, rescaled) = conform(image, camera);
    // ground truth must live in the same pixel frame as the image
    gt_silhouette.check_size(camera.width(), camera.height())?;
    let mesh_sil = raster::rasterize(mesh, &camera).silhouette;
    let labeled = fitting::anchor_oracle(mesh, &camera, gt_silhouette, anchors, margin_px)?;
    let patches = labeled
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let center = camera.project(&mesh.vertices()[a.vertex_index]);
            let (img, sil) = crop_maps(&image, &mesh_sil, center, ANCHOR_PATCH_SIZE);
            Patch {
                handle_name: format!("anchor_{i:03}"),
                center_px: [center.x, center.y],
                image: img,
                mesh_silhouette: sil,
                label: PatchLabel::AnchorMovement(a.active.then_some(a.movement)),
                off_image: !camera.contains_pixel(&center),
            }
        })
        .collect();
    Ok(PatchSet { patches, rescaled })
}

impl Patch {
    /// Write the image crop as an 8-bit PNG.
    pub fn save_image_png(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut img =
            image::GrayImage::new(self.image.width() as u32, self.image.height() as u32);
        for y in 0..self.image.height() {
            for x in 0..self.image.width() {
                let v = (self.image.get(x, y).unwrap_or(0.0).clamp(0.0, 1.0) * 255.0).round();
                img.put_pixel(x as u32, y as u32, image::Luma([v as u8]));
            }
        }
        img.save(path)
            .map_err(|e| crate::error::Error::Other(format!("writing {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handles::{self, JointName};
    use crate::primitives;
    use nalgebra::{Point3, Vector3};
    use std::collections::BTreeSet;

    fn setup() -> (TriMesh, WeakPerspectiveCamera, ScalarMap) {
        let mesh = primitives::ellipsoid(
            &primitives::icosphere(3),
            Vector3::new(0.5, 0.5, 0.5),
        );
        let camera = WeakPerspectiveCamera::new(100.0, [112.0, 112.0], [224, 224]).unwrap();
        let image = ScalarMap::from_fn(224, 224, |x, y| {
            Some(((x + y) % 7) as f64 / 7.0)
        });
        (mesh, camera, image)
    }

    #[test]
    fn joint_level_counts_and_sizes() {
        let (mesh, camera, image) = setup();
        let seeds: Vec<(JointName, Point3<f64>)> = JointName::ALL
            .iter()
            .map(|&n| {
                let a = n.index() as f64 / 10.0 * std::f64::consts::TAU;
                (n, Point3::new(a.cos() * 0.5, a.sin() * 0.5, 0.1))
            })
            .collect();
        let meta = handles::make_template_metadata(&mesh, &seeds, 10, &[], 0.0).unwrap();
        let obs: JointObservations = std::array::from_fn(|i| {
            (i != 3).then(|| nalgebra::Point2::new(100.0 + i as f64, 90.0))
        });
        let set = export_joint_patches(&image, &mesh, &camera, &meta.groups, &obs).unwrap();
        assert_eq!(set.patches.len(), 10);
        assert!(!set.rescaled);
        for p in &set.patches {
            assert_eq!(p.image.width(), 64);
            assert_eq!(p.image.height(), 64);
            assert_eq!(p.mesh_silhouette.width(), 64);
        }
        // the invalidated joint gets a None label
        assert!(matches!(
            set.patches[3].label,
            PatchLabel::JointMotion(None)
        ));
        match set.patches[0].label {
            PatchLabel::JointMotion(Some(_)) => {}
            ref other => panic!("expected motion label, got {other:?}"),
        }
    }

    #[test]
    fn anchor_level_counts_and_sizes() {
        let (mesh, camera, image) = setup();
        let anchors =
            handles::select_anchor_handles(&mesh, &BTreeSet::new(), 200, 1).unwrap();
        let gt = raster::rasterize(&mesh, &camera).silhouette;
        let set =
            export_anchor_patches(&image, &mesh, &camera, &anchors, &gt, 20.0).unwrap();
        assert_eq!(set.patches.len(), 200);
        for p in &set.patches {
            assert_eq!(p.image.width(), 32);
            // identical silhouettes: all anchors inactive -> None labels
            assert!(matches!(p.label, PatchLabel::AnchorMovement(None)));
        }
    }

    #[test]
    fn corner_handle_is_zero_padded() {
        let (mesh, camera, image) = setup();
        let group = JointHandleGroup {
            joint_name: JointName::Head,
            vertex_indices: vec![0],
        };
        // move vertex 0 so it projects just inside the image corner
        let mut vertices = mesh.vertices().to_vec();
        vertices[0] = Point3::new(-1.116, -1.116, 1.0);
        let moved = mesh.with_positions(vertices).unwrap();
        let obs: JointObservations = std::array::from_fn(|_| None);
        let set = export_joint_patches(&image, &moved, &camera, &[group], &obs).unwrap();
        let p = &set.patches[0];
        assert!(p.center_px[0].abs() < 1.0 && p.center_px[1].abs() < 1.0);
        // three quadrants fall outside the image and are zero-padded
        assert_eq!(p.image.get(0, 0), Some(0.0));
        assert_eq!(p.image.get(31, 0), Some(0.0));
        assert_eq!(p.image.get(0, 31), Some(0.0));
        assert!(!p.off_image);
    }

    #[test]
    fn non_conforming_image_is_rescaled() {
        let (mesh, _, _) = setup();
        let camera = WeakPerspectiveCamera::new(50.0, [56.0, 56.0], [112, 112]).unwrap();
        let image = ScalarMap::from_fn(112, 112, |_, _| Some(0.5));
        let obs: JointObservations = std::array::from_fn(|_| None);
        let group = JointHandleGroup {
            joint_name: JointName::Waist,
            vertex_indices: vec![0, 1, 2],
        };
        let set = export_joint_patches(&image, &mesh, &camera, &[group], &obs).unwrap();
        assert!(set.rescaled);
        assert_eq!(set.patches.len(), 1);
        assert_eq!(set.patches[0].image.width(), 64);
    }
}
