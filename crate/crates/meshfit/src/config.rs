//! Pipeline configuration: defaults, a flat dotted-key text format, and
//! command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shading::ShadingWeights;

/// All tunables of the fitting pipeline. Keys use flat dotted names, e.g.
/// `stages.anchor.enabled` or `shading.lambda_photo`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub joint_enabled: bool,
    pub anchor_enabled: bool,
    pub vertex_enabled: bool,
    /// Laplacian handle weight for the joint stage.
    pub joint_weight: f64,
    /// Laplacian handle weight for the anchor stage.
    pub anchor_weight: f64,
    /// Maximum oracle+deform rounds in the anchor stage.
    pub anchor_iters: usize,
    /// Anchors farther than this from the mesh silhouette boundary go
    /// inactive, pixels.
    pub anchor_margin_px: f64,
    /// Number of anchors selected on the input mesh.
    pub anchor_count: usize,
    pub shading: ShadingWeights,
    pub gn_iters: usize,
    pub magnify_factor: f64,
    pub albedo: f64,
    /// Seed for anchor selection (k-means) and any sampled tooling.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            joint_enabled: true,
            anchor_enabled: true,
            vertex_enabled: true,
            joint_weight: 10.0,
            anchor_weight: 1.0,
            anchor_iters: 3,
            anchor_margin_px: 20.0,
            anchor_count: 200,
            shading: ShadingWeights::default(),
            gn_iters: crate::shading::DEFAULT_GN_ITERS,
            magnify_factor: 10.0,
            albedo: 0.6,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: &str| Error::BadConfigValue {
            key: key.to_string(),
            value: value.to_string(),
            msg: msg.to_string(),
        };
        let parse_f64 = || value.parse::<f64>().map_err(|_| bad("expected a number"));
        let parse_usize = || value.parse::<usize>().map_err(|_| bad("expected an integer"));
        let parse_bool = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad("expected true/false")),
        };
        match key {
            "stages.joint.enabled" => self.joint_enabled = parse_bool()?,
            "stages.anchor.enabled" => self.anchor_enabled = parse_bool()?,
            "stages.vertex.enabled" => self.vertex_enabled = parse_bool()?,
            "joint.weight" => self.joint_weight = parse_f64()?,
            "anchor.weight" => self.anchor_weight = parse_f64()?,
            "anchor.iters" => self.anchor_iters = parse_usize()?,
            "anchor.margin_px" => self.anchor_margin_px = parse_f64()?,
            "anchor.count" => self.anchor_count = parse_usize()?,
            "shading.lambda_photo" => self.shading.lambda_photo = parse_f64()?,
            "shading.lambda_depth" => self.shading.lambda_depth = parse_f64()?,
            "shading.lambda_smooth" => self.shading.lambda_smooth = parse_f64()?,
            "shading.gn_iters" => self.gn_iters = parse_usize()?,
            "shading.magnify_factor" => self.magnify_factor = parse_f64()?,
            "shading.albedo" => self.albedo = parse_f64()?,
            "seed" => self.seed = value.parse::<u64>().map_err(|_| bad("expected an integer"))?,
            _ => {
                return Err(Error::UnknownConfigKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Load `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path, lineno + 1, "expected `key = value`")
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply an override that is either `key=value` or a path to a config
    /// file (the form the CLI's `--config` flag accepts).
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        if let Some((key, value)) = spec.split_once('=') {
            self.set(key.trim(), value.trim())
        } else {
            self.apply_file(spec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = FitConfig::default();
        assert_eq!(c.joint_weight, 10.0);
        assert_eq!(c.anchor_weight, 1.0);
        assert_eq!(c.anchor_iters, 3);
        assert_eq!(c.anchor_margin_px, 20.0);
        assert_eq!(c.anchor_count, 200);
        assert_eq!(c.shading.lambda_photo, 1.0);
        assert_eq!(c.shading.lambda_depth, 2.0);
        assert_eq!(c.shading.lambda_smooth, 4.0);
        assert_eq!(c.magnify_factor, 10.0);
        assert_eq!(c.albedo, 0.6);
    }

    #[test]
    fn set_and_reject() {
        let mut c = FitConfig::default();
        c.set("stages.anchor.enabled", "false").unwrap();
        assert!(!c.anchor_enabled);
        c.set("anchor.iters", "5").unwrap();
        assert_eq!(c.anchor_iters, 5);
        assert!(matches!(
            c.set("no.such.key", "1"),
            Err(Error::UnknownConfigKey { .. })
        ));
        assert!(matches!(
            c.set("joint.weight", "abc"),
            Err(Error::BadConfigValue { .. })
        ));
    }

    #[test]
    fn file_and_inline_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.txt");
        std::fs::write(&p, "# comment\njoint.weight = 4\nanchor.margin_px = 12 # inline\n")
            .unwrap();
        let mut c = FitConfig::default();
        c.apply_override(p.to_str().unwrap()).unwrap();
        assert_eq!(c.joint_weight, 4.0);
        assert_eq!(c.anchor_margin_px, 12.0);
        c.apply_override("stages.vertex.enabled=false").unwrap();
        assert!(!c.vertex_enabled);
    }
}
