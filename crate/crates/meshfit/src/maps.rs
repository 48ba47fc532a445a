//! Binary masks and depth maps shared by the rasterizer, shading, and
//! evaluation code.

use std::path::Path;

use crate::error::{Error, Result};

/// Binary image mask. Pixel `(x, y)` covers the unit square
/// `[x, x+1) x [y, y+1)` with center `(x+0.5, y+0.5)`; row 0 is `v = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// False outside the image bounds.
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.data[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn pixels(&self) -> &[bool] {
        &self.data
    }

    /// Pixel-wise XOR; sizes must match.
    pub fn xor(&self, other: &Mask) -> Result<Mask> {
        self.check_size(other.width, other.height)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a != b)
            .collect();
        Ok(Mask {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Set pixels with a 4-neighbor unset or lying on the image border.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x as i64, y as i64) {
                    continue;
                }
                let (xi, yi) = (x as i64, y as i64);
                if !self.get(xi - 1, yi)
                    || !self.get(xi + 1, yi)
                    || !self.get(xi, yi - 1)
                    || !self.get(xi, yi + 1)
                {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub(crate) fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::SizeMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width,
                height,
            });
        }
        Ok(())
    }

    /// Write as a single-channel PNG with values 0/255.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut img = image::GrayImage::new(self.width as u32, self.height as u32);
        for (i, &b) in self.data.iter().enumerate() {
            let (x, y) = (i % self.width, i / self.width);
            img.put_pixel(x as u32, y as u32, image::Luma([if b { 255 } else { 0 }]));
        }
        img.save(path)
            .map_err(|e| Error::Other(format!("writing {}: {e}", path.display())))
    }

    /// Read from any image; nonzero luma means set.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Mask> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Other(format!("reading {}: {e}", path.display())))?
            .into_luma8();
        let (width, height) = (img.width() as usize, img.height() as usize);
        let mut mask = Mask::new(width, height);
        for (x, y, p) in img.enumerate_pixels() {
            if p.0[0] != 0 {
                mask.set(x as usize, y as usize, true);
            }
        }
        Ok(mask)
    }
}

/// Float map with per-pixel validity, used for depth (meters, larger values
/// closer to the viewer) and grayscale intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

pub type DepthMap = ScalarMap;

impl ScalarMap {
    pub fn new_invalid(width: usize, height: usize) -> ScalarMap {
        ScalarMap {
            width,
            height,
            data: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> ScalarMap {
        let mut map = ScalarMap::new_invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                if let Some(v) = f(x, y) {
                    map.set(x, y, v);
                }
            }
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.data[i])
    }

    /// None outside the image bounds or on invalid pixels.
    pub fn get_checked(&self, x: i64, y: i64) -> Option<f64> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = y * self.width + x;
        self.data[i] = value;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.valid[y * self.width + x] = false;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Mask of valid pixels.
    pub fn validity_mask(&self) -> Mask {
        let mut m = Mask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_valid(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers sit at
    /// integer+0.5). Returns None unless all four taps are valid.
    pub fn bilinear(&self, u: f64, v: f64) -> Option<f64> {
        let fx = u - 0.5;
        let fy = v - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v00 = self.get_checked(x0, y0)?;
        let v10 = self.get_checked(x0 + 1, y0)?;
        let v01 = self.get_checked(x0, y0 + 1)?;
        let v11 = self.get_checked(x0 + 1, y0 + 1)?;
        Some(
            v00 * (1.0 - tx) * (1.0 - ty)
                + v10 * tx * (1.0 - ty)
                + v01 * (1.0 - tx) * ty
                + v11 * tx * ty,
        )
    }

    pub(crate) fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::SizeMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width,
                height,
            });
        }
        Ok(())
    }

    /// Apply `f` to every valid pixel value.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> ScalarMap {
        let mut out = self.clone();
        for i in 0..out.data.len() {
            if out.valid[i] {
                out.data[i] = f(out.data[i]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_interpolates() {
        let mut m = ScalarMap::new_invalid(2, 2);
        m.set(0, 0, 0.0);
        m.set(1, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 1, 3.0);
        // center of the 2x2 block
        assert!((m.bilinear(1.0, 1.0).unwrap() - 1.5).abs() < 1e-12);
        // exactly at pixel (0,0) center
        assert!((m.bilinear(0.5, 0.5).unwrap() - 0.0).abs() < 1e-12);
        // outside
        assert!(m.bilinear(0.4, 0.5).is_none());
    }

    #[test]
    fn bilinear_needs_all_taps() {
        let mut m = ScalarMap::new_invalid(2, 2);
        m.set(0, 0, 0.0);
        m.set(1, 0, 1.0);
        m.set(0, 1, 2.0);
        assert!(m.bilinear(1.0, 1.0).is_none());
    }

    #[test]
    fn mask_boundary() {
        let mut m = Mask::new(5, 5);
        for y in 1..4 {
            for x in 1..4 {
                m.set(x, y, true);
            }
        }
        let boundary = m.boundary_pixels();
        assert_eq!(boundary.len(), 8); // 3x3 block minus interior pixel
        assert!(!boundary.contains(&(2, 2)));
    }

    #[test]
    fn png_round_trip() {
        let mut m = Mask::new(7, 3);
        m.set(0, 0, true);
        m.set(6, 2, true);
        m.set(3, 1, true);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        m.save_png(&p).unwrap();
        assert_eq!(Mask::load_png(&p).unwrap(), m);
    }
}
