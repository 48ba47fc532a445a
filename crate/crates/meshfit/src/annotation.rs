//! Annotation records: one JSON file per image naming the evidence (joints,
//! silhouette, camera, initial mesh) a fit consumes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::camera::WeakPerspectiveCamera;
use crate::error::{Error, Result};
use crate::fitting::JointObservations;
use crate::handles::JointName;
use crate::maps::{Mask, ScalarMap};
use crate::mesh::TriMesh;

/// One annotated image. Paths are stored as written in the file and
/// resolved against the annotation's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub silhouette: Option<PathBuf>,
    pub initial_mesh: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub template_meta: Option<PathBuf>,
    pub camera: WeakPerspectiveCamera,
    /// All ten joint names must be present; `null` marks an invalid joint.
    pub joints_2d: BTreeMap<String, Option<[f64; 2]>>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Whole-body filter outcome: both rules must hold for a record to pass.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FilterOutcome {
    /// Every joint is annotated and lies inside the image bounds.
    pub all_joints_in_image: bool,
    /// Every annotated joint pixel is inside the body silhouette
    /// (None when no silhouette is available).
    pub joints_inside_silhouette: Option<bool>,
}

impl FilterOutcome {
    pub fn passes(&self) -> bool {
        self.all_joints_in_image && self.joints_inside_silhouette.unwrap_or(true)
    }
}

impl Annotation {
    pub fn load(path: impl AsRef<Path>) -> Result<Annotation> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut annotation: Annotation = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        annotation.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        annotation.validate()?;
        Ok(annotation)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        for name in JointName::ALL {
            if !self.joints_2d.contains_key(name.as_str()) {
                return Err(Error::MissingJoint {
                    name: name.as_str().to_string(),
                });
            }
        }
        for name in self.joints_2d.keys() {
            JointName::from_str(name)?;
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Joint pixels in `JointName::ALL` order.
    pub fn observations(&self) -> JointObservations {
        std::array::from_fn(|i| {
            self.joints_2d
                .get(JointName::ALL[i].as_str())
                .copied()
                .flatten()
                .map(|[u, v]| Point2::new(u, v))
        })
    }

    pub fn load_initial_mesh(&self) -> Result<TriMesh> {
        crate::io::load_mesh(self.resolve(&self.initial_mesh))
    }

    /// Silhouette mask, checked against the camera image size.
    pub fn load_silhouette(&self) -> Result<Option<Mask>> {
        let Some(p) = &self.silhouette else {
            return Ok(None);
        };
        let mask = Mask::load_png(self.resolve(p))?;
        mask.check_size(self.camera.width(), self.camera.height())?;
        Ok(Some(mask))
    }

    /// Grayscale image in [0, 1], checked against the camera image size.
    pub fn load_image_gray(&self) -> Result<Option<ScalarMap>> {
        let Some(p) = &self.image else {
            return Ok(None);
        };
        let path = self.resolve(p);
        let img = image::open(&path)
            .map_err(|e| Error::Other(format!("reading {}: {e}", path.display())))?
            .into_luma8();
        let map = ScalarMap::from_fn(img.width() as usize, img.height() as usize, |x, y| {
            Some(img.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0)
        });
        map.check_size(self.camera.width(), self.camera.height())?;
        Ok(map.into())
    }

    pub fn load_template_meta(
        &self,
        vertex_count: usize,
    ) -> Result<Option<crate::handles::TemplateMetadata>> {
        let Some(p) = &self.template_meta else {
            return Ok(None);
        };
        Ok(Some(crate::handles::load_template_metadata(
            self.resolve(p),
            vertex_count,
        )?))
    }

    /// Apply the whole-body filter rules against the (already loaded)
    /// silhouette.
    pub fn filter_outcome(&self, silhouette: Option<&Mask>) -> FilterOutcome {
        let obs = self.observations();
        let all_joints_in_image = obs.iter().all(|j| match j {
            Some(p) => {
                p.x >= 0.0
                    && p.y >= 0.0
                    && p.x < self.camera.width() as f64
                    && p.y < self.camera.height() as f64
            }
            None => false,
        });
        let joints_inside_silhouette = silhouette.map(|mask| {
            obs.iter().flatten().all(|p| {
                mask.get(p.x.floor() as i64, p.y.floor() as i64)
            })
        });
        FilterOutcome {
            all_joints_in_image,
            joints_inside_silhouette,
        }
    }
}
