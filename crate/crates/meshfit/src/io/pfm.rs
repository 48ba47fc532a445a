//! PFM (portable float map) depth-map IO. Grayscale `Pf` only; invalid
//! pixels are stored as negative infinity.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::maps::ScalarMap;

/// Write a grayscale PFM. Little-endian (negative scale), rows bottom-up per
/// the format convention; invalid pixels become `-inf`.
pub fn save(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        write!(w, "Pf\n{} {}\n-1.0\n", map.width(), map.height())?;
        for y in (0..map.height()).rev() {
            for x in 0..map.width() {
                let v = map.get(x, y).unwrap_or(f64::NEG_INFINITY) as f32;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Read a grayscale PFM; non-finite pixels load as invalid.
pub fn load(path: impl AsRef<Path>) -> Result<ScalarMap> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    // header: three whitespace-separated tokens, each followed by one
    // whitespace byte
    let mut cursor = 0usize;
    let mut token = || -> Result<String> {
        let mut tok = Vec::new();
        while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            tok.push(bytes[cursor]);
            cursor += 1;
        }
        if tok.is_empty() {
            return Err(Error::parse(path, 0, "truncated PFM header"));
        }
        cursor += 1; // single whitespace after the token
        Ok(String::from_utf8_lossy(&tok).into_owned())
    };

    let magic = token()?;
    if magic != "Pf" {
        return Err(Error::parse(path, 0, format!("bad PFM magic `{magic}`")));
    }
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::parse(path, 0, "bad width"))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::parse(path, 0, "bad height"))?;
    let scale: f64 = token()?
        .parse()
        .map_err(|_| Error::parse(path, 0, "bad scale"))?;
    let little_endian = scale < 0.0;

    let need = width * height * 4;
    if bytes.len() < cursor + need {
        return Err(Error::parse(path, 0, "truncated PFM pixel data"));
    }
    let mut map = ScalarMap::new_invalid(width, height);
    let mut off = cursor;
    for y in (0..height).rev() {
        for x in 0..width {
            let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
            off += 4;
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if v.is_finite() {
                map.set(x, y, v as f64);
            }
        }
    }
    Ok(map)
}
