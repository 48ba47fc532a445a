//! Hierarchical mesh fitting.
//!
//! Refines a coarse 3D body mesh against a single image's 2D evidence in
//! three handle levels — joints, silhouette anchors, and per-vertex depth —
//! using weighted Laplacian mesh editing, plus the evaluation metrics and
//! dataset tooling around that pipeline.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `meshfit` binary for the batch command-line interface.

pub mod annotation;
pub mod camera;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod deform;
pub mod error;
pub mod fitting;
pub mod handles;
pub mod io;
pub mod kmeans;
pub mod laplacian;
pub mod maps;
pub mod mesh;
pub mod metrics;
pub mod patches;
pub mod primitives;
pub mod raster;
pub mod shading;
pub mod spatial;
pub mod sparse;

pub use error::{Error, Result};
pub use mesh::TriMesh;
