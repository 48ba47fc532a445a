//! Mesh and map file formats: OBJ, PLY, PFM.

pub mod obj;
pub mod pfm;
pub mod ply;

use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Load an OBJ or PLY triangle mesh, dispatching on the file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("obj") => obj::load(path),
        Some("ply") => ply::load(path),
        other => Err(Error::Other(format!(
            "unsupported mesh extension {:?} for {}",
            other,
            path.display()
        ))),
    }
}

/// Save a mesh as OBJ or PLY (ASCII), dispatching on the file extension.
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("obj") => obj::save(mesh, path),
        Some("ply") => ply::save_ascii(mesh, path),
        other => Err(Error::Other(format!(
            "unsupported mesh extension {:?} for {}",
            other,
            path.display()
        ))),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_lowercase())
}
