//! Minimal Wavefront OBJ reader and writer.
//!
//! Only positions (`v`), optional normals (`vn`) and faces (`f`) are
//! interpreted. Texture coordinates, groups, materials and smoothing records
//! are accepted and ignored.

use std::io::{BufRead, Write};

use super::{SurfaceMesh, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no vertices")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> ObjError {
    ObjError::Parse {
        line,
        message: message.into(),
    }
}

/// Resolves one `f` corner (`7`, `7/2`, `7//3`, `-1`) to a 0-based index.
fn corner_index(token: &str, vertex_count: usize, line: usize) -> Result<usize, ObjError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| parse_err(line, format!("bad face index `{token}`")))?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        vertex_count as i64 + raw
    } else {
        return Err(parse_err(line, "face index 0 is not valid"));
    };
    if resolved < 0 || resolved as usize >= vertex_count {
        return Err(parse_err(
            line,
            format!("face index {raw} out of range ({vertex_count} vertices declared)"),
        ));
    }
    Ok(resolved as usize)
}

fn parse_triple(fields: &[&str], line: usize, what: &str) -> Result<Vec3, ObjError> {
    if fields.len() < 3 {
        return Err(parse_err(line, format!("{what} needs 3 coordinates")));
    }
    let mut xyz = [0.0; 3];
    for (slot, field) in xyz.iter_mut().zip(fields) {
        *slot = field
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("bad {what} coordinate `{field}`")))?;
        if !slot.is_finite() {
            return Err(parse_err(line, format!("non-finite {what} coordinate")));
        }
    }
    Ok(Vec3::new(xyz[0], xyz[1], xyz[2]))
}

/// Reads an OBJ stream. Polygons are fan-triangulated around their first
/// corner and triangles that repeat an index are dropped.
pub fn load_obj<R: BufRead>(source: R) -> Result<SurfaceMesh, ObjError> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut triangles = Vec::new();

    for (number, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = number + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match tag {
            "v" => vertices.push(parse_triple(&rest, line_no, "vertex")?),
            "vn" => normals.push(parse_triple(&rest, line_no, "normal")?),
            "f" => {
                if rest.len() < 3 {
                    return Err(parse_err(line_no, "face with fewer than 3 indices"));
                }
                let corners = rest
                    .iter()
                    .map(|t| corner_index(t, vertices.len(), line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                        triangles.push(tri);
                    }
                }
            }
            "vt" | "vp" | "o" | "g" | "s" | "l" | "p" | "usemtl" | "mtllib" => {}
            other => return Err(parse_err(line_no, format!("unknown record `{other}`"))),
        }
    }

    if vertices.is_empty() {
        return Err(ObjError::Empty);
    }
    // Normals are only kept when they line up one-to-one with positions.
    let normals = (normals.len() == vertices.len()).then_some(normals);
    Ok(SurfaceMesh {
        vertices,
        triangles,
        normals,
    })
}

pub fn load_obj_file(path: impl AsRef<std::path::Path>) -> Result<SurfaceMesh, ObjError> {
    let file = std::fs::File::open(path)?;
    load_obj(std::io::BufReader::new(file))
}

/// Writes positions, optional per-vertex normals and 1-based faces.
///
/// Coordinates use Rust's shortest round-trip formatting, so reading the
/// file back reproduces every `f64` exactly.
pub fn write_obj<W: Write>(
    out: &mut W,
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    normals: Option<&[Vec3]>,
) -> std::io::Result<()> {
    for v in vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    if let Some(normals) = normals {
        for n in normals {
            writeln!(out, "vn {} {} {}", n.x, n.y, n.z)?;
        }
        for t in triangles {
            let [a, b, c] = t.map(|i| i + 1);
            writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")?;
        }
    } else {
        for t in triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
    }
    Ok(())
}

pub fn write_obj_file(
    path: impl AsRef<std::path::Path>,
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_obj(&mut out, vertices, triangles, None)?;
    out.flush()
}
