//! PLY reader (ASCII and binary little/big endian) and ASCII writer.
//! Only vertex positions and face index lists are interpreted.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLittle,
    BinaryBig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_f64(self, bytes: &[u8], big: bool) -> f64 {
        macro_rules! de {
            ($t:ty) => {{
                let arr = bytes[..self.size()].try_into().unwrap();
                if big {
                    <$t>::from_be_bytes(arr) as f64
                } else {
                    <$t>::from_le_bytes(arr) as f64
                }
            }};
        }
        match self {
            Scalar::I8 => de!(i8),
            Scalar::U8 => de!(u8),
            Scalar::I16 => de!(i16),
            Scalar::U16 => de!(u16),
            Scalar::I32 => de!(i32),
            Scalar::U32 => de!(u32),
            Scalar::F32 => de!(f32),
            Scalar::F64 => de!(f64),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct ElementDef {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

pub fn load(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    // header is always ASCII lines
    let mut lineno = 0usize;
    let mut read_line = |r: &mut BufReader<File>| -> Result<String> {
        let mut line = String::new();
        let n = r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::parse(path, lineno, "unexpected end of header"));
        }
        lineno += 1;
        Ok(line.trim_end().to_string())
    };

    let magic = read_line(&mut reader)?;
    if magic.trim() != "ply" {
        return Err(Error::parse(path, 1, "missing `ply` magic"));
    }

    let mut format = None;
    let mut elements: Vec<ElementDef> = Vec::new();
    loop {
        let line = read_line(&mut reader)?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                format = Some(match tokens.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittle,
                    Some("binary_big_endian") => Format::BinaryBig,
                    other => {
                        return Err(Error::parse(path, 0, format!("bad format {other:?}")));
                    }
                });
            }
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| Error::parse(path, 0, "element needs a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(path, 0, "element needs a count"))?;
                elements.push(ElementDef {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, 0, "property before element"))?;
                let ty = tokens
                    .next()
                    .ok_or_else(|| Error::parse(path, 0, "property needs a type"))?;
                if ty == "list" {
                    let count = tokens
                        .next()
                        .and_then(Scalar::parse)
                        .ok_or_else(|| Error::parse(path, 0, "bad list count type"))?;
                    let item = tokens
                        .next()
                        .and_then(Scalar::parse)
                        .ok_or_else(|| Error::parse(path, 0, "bad list item type"))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| Error::parse(path, 0, "list property needs a name"))?;
                    elem.properties.push(Property::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
                } else {
                    let ty = Scalar::parse(ty)
                        .ok_or_else(|| Error::parse(path, 0, format!("bad type `{ty}`")))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| Error::parse(path, 0, "property needs a name"))?;
                    elem.properties.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::parse(
                    path,
                    0,
                    format!("unknown header record `{other}`"),
                ));
            }
        }
    }
    let format = format.ok_or_else(|| Error::parse(path, 0, "header missing `format`"))?;

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    match format {
        Format::Ascii => {
            let mut tokens: Vec<String> = Vec::new();
            for line in reader.lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                tokens.extend(line.split_whitespace().map(|s| s.to_string()));
            }
            let mut cursor = 0usize;
            let mut next = |what: &str| -> Result<f64> {
                let tok = tokens
                    .get(cursor)
                    .ok_or_else(|| Error::parse(path, 0, format!("truncated data at {what}")))?;
                cursor += 1;
                tok.parse()
                    .map_err(|_| Error::parse(path, 0, format!("bad number `{tok}` in {what}")))
            };
            for elem in &elements {
                for _ in 0..elem.count {
                    let mut xyz = [f64::NAN; 3];
                    for prop in &elem.properties {
                        match prop {
                            Property::Scalar { name, .. } => {
                                let v = next(&elem.name)?;
                                store_coord(&mut xyz, name, v);
                            }
                            Property::List { name, .. } => {
                                let n = next(&elem.name)? as usize;
                                let mut idx = Vec::with_capacity(n);
                                for _ in 0..n {
                                    idx.push(next(&elem.name)? as usize);
                                }
                                if elem.name == "face" && is_index_list(name) {
                                    push_face_fan(&mut faces, &idx, path)?;
                                }
                            }
                        }
                    }
                    if elem.name == "vertex" {
                        push_vertex(&mut vertices, xyz, path)?;
                    }
                }
            }
        }
        Format::BinaryLittle | Format::BinaryBig => {
            let big = format == Format::BinaryBig;
            let mut data = Vec::new();
            reader
                .read_to_end(&mut data)
                .map_err(|e| Error::io(path, e))?;
            let mut cursor = 0usize;
            let mut take = |n: usize| -> Result<&[u8]> {
                if cursor + n > data.len() {
                    return Err(Error::parse(path, 0, "truncated binary data"));
                }
                let s = &data[cursor..cursor + n];
                cursor += n;
                Ok(s)
            };
            for elem in &elements {
                for _ in 0..elem.count {
                    let mut xyz = [f64::NAN; 3];
                    for prop in &elem.properties {
                        match prop {
                            Property::Scalar { name, ty } => {
                                let v = ty.read_f64(take(ty.size())?, big);
                                store_coord(&mut xyz, name, v);
                            }
                            Property::List { name, count, item } => {
                                let n = count.read_f64(take(count.size())?, big) as usize;
                                let mut idx = Vec::with_capacity(n);
                                for _ in 0..n {
                                    idx.push(item.read_f64(take(item.size())?, big) as usize);
                                }
                                if elem.name == "face" && is_index_list(name) {
                                    push_face_fan(&mut faces, &idx, path)?;
                                }
                            }
                        }
                    }
                    if elem.name == "vertex" {
                        push_vertex(&mut vertices, xyz, path)?;
                    }
                }
            }
        }
    }

    TriMesh::new(vertices, faces)
}

fn store_coord(xyz: &mut [f64; 3], name: &str, v: f64) {
    match name {
        "x" => xyz[0] = v,
        "y" => xyz[1] = v,
        "z" => xyz[2] = v,
        _ => {}
    }
}

fn is_index_list(name: &str) -> bool {
    matches!(name, "vertex_indices" | "vertex_index")
}

fn push_vertex(vertices: &mut Vec<Point3<f64>>, xyz: [f64; 3], path: &Path) -> Result<()> {
    if xyz.iter().any(|c| c.is_nan()) {
        return Err(Error::parse(path, 0, "vertex element missing x/y/z"));
    }
    vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    Ok(())
}

fn push_face_fan(faces: &mut Vec<[usize; 3]>, idx: &[usize], path: &Path) -> Result<()> {
    if idx.len() < 3 {
        return Err(Error::parse(path, 0, "face needs at least 3 indices"));
    }
    for i in 1..idx.len() - 1 {
        faces.push([idx[0], idx[i], idx[i + 1]]);
    }
    Ok(())
}

/// Write an ASCII PLY with vertex positions (10 significant digits) and
/// triangular faces.
pub fn save_ascii(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", mesh.vertex_count())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        writeln!(w, "element face {}", mesh.face_count())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "end_header")?;
        for p in mesh.vertices() {
            writeln!(w, "{:.9e} {:.9e} {:.9e}", p.x, p.y, p.z)?;
        }
        for f in mesh.faces() {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Write a binary little-endian PLY with double positions and triangular
/// faces.
pub fn save_binary_le(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
             property double x\nproperty double y\nproperty double z\n\
             element face {}\nproperty list uchar int vertex_indices\nend_header\n",
            mesh.vertex_count(),
            mesh.face_count()
        )?;
        for p in mesh.vertices() {
            for c in [p.x, p.y, p.z] {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        for f in mesh.faces() {
            w.write_all(&[3u8])?;
            for &i in f {
                w.write_all(&(i as i32).to_le_bytes())?;
            }
        }
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e))
}
