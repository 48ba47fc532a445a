//! Weak-perspective camera: pixel = scale * (x, y) + translation.
//!
//! The camera looks down -z; larger z is closer to the viewer. The +y axis
//! maps to the +v image row direction.

use nalgebra::{Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakPerspectiveCamera {
    /// Pixels per meter; positive.
    pub scale: f64,
    /// Pixel offset added after scaling.
    pub translation: [f64; 2],
    /// (width, height) in pixels.
    pub image_size: [usize; 2],
}

impl WeakPerspectiveCamera {
    pub fn new(scale: f64, translation: [f64; 2], image_size: [usize; 2]) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Other(format!("camera scale must be > 0, got {scale}")));
        }
        if image_size[0] == 0 || image_size[1] == 0 {
            return Err(Error::Other("camera image size must be positive".into()));
        }
        Ok(WeakPerspectiveCamera {
            scale,
            translation,
            image_size,
        })
    }

    /// A camera centered on `center` that maps `extent_m` meters onto the
    /// smaller image dimension.
    pub fn framing(center: Point3<f64>, extent_m: f64, image_size: [usize; 2]) -> Self {
        let side = image_size[0].min(image_size[1]) as f64;
        let scale = side / extent_m;
        WeakPerspectiveCamera {
            scale,
            translation: [
                image_size[0] as f64 / 2.0 - scale * center.x,
                image_size[1] as f64 / 2.0 - scale * center.y,
            ],
            image_size,
        }
    }

    pub fn width(&self) -> usize {
        self.image_size[0]
    }

    pub fn height(&self) -> usize {
        self.image_size[1]
    }

    /// Project to continuous pixel coordinates; z is dropped (callers keep
    /// it for depth).
    pub fn project(&self, p: &Point3<f64>) -> Point2<f64> {
        Point2::new(
            self.scale * p.x + self.translation[0],
            self.scale * p.y + self.translation[1],
        )
    }

    /// Inverse of `project` at a fixed depth.
    pub fn unproject(&self, pixel: &Point2<f64>, z: f64) -> Point3<f64> {
        Point3::new(
            (pixel.x - self.translation[0]) / self.scale,
            (pixel.y - self.translation[1]) / self.scale,
            z,
        )
    }

    /// Image-plane direction of a world direction (z dropped), unnormalized
    /// and in pixels per meter.
    pub fn project_direction(&self, d: &nalgebra::Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.scale * d.x, self.scale * d.y)
    }

    pub fn contains_pixel(&self, p: &Point2<f64>) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x < self.image_size[0] as f64
            && p.y < self.image_size[1] as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn formula_cases() {
        let cam = WeakPerspectiveCamera::new(2.0, [10.0, 20.0], [64, 64]).unwrap();
        assert_eq!(cam.project(&Point3::new(1.0, 1.0, 5.0)), Point2::new(12.0, 22.0));
        let id = WeakPerspectiveCamera::new(1.0, [0.0, 0.0], [64, 64]).unwrap();
        assert_eq!(id.project(&Point3::origin()), Point2::new(0.0, 0.0));
    }

    #[test]
    fn unproject_round_trip() {
        let cam = WeakPerspectiveCamera::new(133.7, [-4.0, 9.5], [128, 256]).unwrap();
        let p = Point3::new(0.31, -1.27, 2.5);
        let back = cam.unproject(&cam.project(&p), p.z);
        assert_relative_eq!(back, p, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WeakPerspectiveCamera::new(0.0, [0.0, 0.0], [4, 4]).is_err());
        assert!(WeakPerspectiveCamera::new(-1.0, [0.0, 0.0], [4, 4]).is_err());
        assert!(WeakPerspectiveCamera::new(1.0, [0.0, 0.0], [0, 4]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_affine(
            ax in -10.0f64..10.0, ay in -10.0f64..10.0, az in -10.0f64..10.0,
            bx in -10.0f64..10.0, by in -10.0f64..10.0, bz in -10.0f64..10.0,
            cx in -10.0f64..10.0, cy in -10.0f64..10.0, cz in -10.0f64..10.0,
        ) {
            let cam = WeakPerspectiveCamera::new(57.0, [3.0, -8.0], [224, 224]).unwrap();
            let a = Point3::new(ax, ay, az);
            let b = nalgebra::Vector3::new(bx, by, bz);
            let c = Point3::new(cx, cy, cz);
            // project(a + b) - project(a) must not depend on a
            let d1 = cam.project(&(a + b)) - cam.project(&a);
            let d2 = cam.project(&(c + b)) - cam.project(&c);
            prop_assert!((d1 - d2).norm() < 1e-9);
        }
    }
}
