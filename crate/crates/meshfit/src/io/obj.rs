//! Wavefront OBJ reader/writer (v/f/vn records only).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Parse an OBJ file. Polygons with more than three vertices are
/// triangulated by a fan split around the first vertex. `vn`/`vt` records
/// and face normal/texcoord references are accepted and ignored.
pub fn load(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| Error::parse(path, lineno, "vertex needs 3 coordinates"))?;
                    *c = tok.parse().map_err(|_| {
                        Error::parse(path, lineno, format!("bad coordinate `{tok}`"))
                    })?;
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut indices = Vec::with_capacity(4);
                for tok in tokens {
                    // "i", "i/t", "i//n", "i/t/n"
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| {
                        Error::parse(path, lineno, format!("bad face index `{tok}`"))
                    })?;
                    let resolved = if idx < 0 {
                        // negative indices are relative to the current vertex count
                        let i = vertices.len() as i64 + idx;
                        if i < 0 {
                            return Err(Error::parse(
                                path,
                                lineno,
                                format!("relative index {idx} out of range"),
                            ));
                        }
                        i as usize
                    } else if idx == 0 {
                        return Err(Error::parse(path, lineno, "face index 0 (OBJ is 1-based)"));
                    } else {
                        idx as usize - 1
                    };
                    if resolved >= vertices.len() {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!(
                                "face index {} out of range ({} vertices so far)",
                                idx,
                                vertices.len()
                            ),
                        ));
                    }
                    indices.push(resolved);
                }
                if indices.len() < 3 {
                    return Err(Error::parse(path, lineno, "face needs at least 3 vertices"));
                }
                for i in 1..indices.len() - 1 {
                    faces.push([indices[0], indices[i], indices[i + 1]]);
                }
            }
            // normals/texcoords/groups/materials are ignored
            Some("vn") | Some("vt") | Some("g") | Some("o") | Some("s") | Some("usemtl")
            | Some("mtllib") => {}
            Some(other) => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unknown record `{other}`"),
                ));
            }
            None => {}
        }
    }

    TriMesh::new(vertices, faces)
}

/// Write an OBJ file with `v`, `vn`, and `f` records. Positions use
/// scientific notation with 10 significant digits so a reload reproduces
/// the serialized values exactly.
pub fn save(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write(mesh, &mut w).map_err(|e| Error::io(path, e))
}

fn write(mesh: &TriMesh, w: &mut impl Write) -> std::io::Result<()> {
    for p in mesh.vertices() {
        writeln!(w, "v {:.9e} {:.9e} {:.9e}", p.x, p.y, p.z)?;
    }
    for n in mesh.vertex_normals() {
        writeln!(w, "vn {:.9e} {:.9e} {:.9e}", n.x, n.y, n.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}
