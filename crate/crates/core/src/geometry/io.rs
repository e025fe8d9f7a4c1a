//! ASCII OBJ (`v`/`f` lines only) and XYZ readers and writers.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_coords<'a>(
    mut fields: impl Iterator<Item = &'a str>,
    path: &Path,
    line: usize,
) -> Result<Point> {
    let mut p = [0.0; 3];
    for c in p.iter_mut() {
        let tok = fields.next().ok_or_else(|| parse_err(path, line, "expected 3 coordinates"))?;
        *c = tok
            .parse::<f64>()
            .map_err(|_| parse_err(path, line, format!("bad coordinate {tok:?}")))?;
    }
    Ok(p)
}

/// Parses the OBJ subset. `path` only labels errors.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let mut fields = raw.split_whitespace();
        match fields.next() {
            Some("v") => vertices.push(parse_coords(fields, path, line)?),
            Some("f") => {
                let idx: Vec<&str> = fields.collect();
                if idx.len() != 3 {
                    return Err(parse_err(path, line, format!("face has {} vertices, expected 3", idx.len())));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(&idx) {
                    // tolerate `i/t/n` forms by keeping the position index
                    let head = tok.split('/').next().unwrap_or("");
                    let i: usize = head
                        .parse()
                        .map_err(|_| parse_err(path, line, format!("bad face index {tok:?}")))?;
                    if i == 0 || i > vertices.len() {
                        return Err(parse_err(path, line, format!("face index {i} out of range")));
                    }
                    *slot = i - 1;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        points.push(parse_coords(raw.split_whitespace(), path, k + 1)?);
    }
    PointCloud::new(points).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

pub fn obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn xyz_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    out
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, obj_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, xyz_string(cloud)).map_err(|e| Error::io(path, e))
}
