//! Binary little-endian PLY checkpoints in the community splat layout:
//! 62 float32 properties per vertex, in the exact order written by the
//! reference exporter. Round trips are bit-exact for conforming files.

use std::fs;
use std::path::Path;

use crate::model::{GaussianPrimitive, Scene, SH_COEFF_COUNT};
use crate::scalar::Scalar;

use super::IoError;

pub const PLY_PROPERTY_COUNT: usize = 62;
pub const PLY_VERTEX_BYTES: usize = PLY_PROPERTY_COUNT * 4;

/// Property names in file order. The 45 `f_rest` coefficients are
/// channel-major: all 15 red coefficients, then green, then blue.
pub fn ply_property_names() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..45 {
        names.push(format!("f_rest_{i}"));
    }
    names.push("opacity".to_string());
    for i in 0..3 {
        names.push(format!("scale_{i}"));
    }
    for i in 0..4 {
        names.push(format!("rot_{i}"));
    }
    debug_assert_eq!(names.len(), PLY_PROPERTY_COUNT);
    names
}

fn header(vertex_count: usize) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    h.push_str(&format!("element vertex {vertex_count}\n"));
    for name in ply_property_names() {
        h.push_str(&format!("property float {name}\n"));
    }
    h.push_str("end_header\n");
    h
}

/// Flattens one primitive into its 62 file-order floats.
fn primitive_to_floats<T: Scalar>(p: &GaussianPrimitive<T>) -> [f32; PLY_PROPERTY_COUNT] {
    let mut f = [0.0f32; PLY_PROPERTY_COUNT];
    let mut i = 0;
    let mut push = |v: f64| {
        f[i] = v as f32;
        i += 1;
    };
    push(p.position.x.widen());
    push(p.position.y.widen());
    push(p.position.z.widen());
    push(0.0); // nx
    push(0.0); // ny
    push(0.0); // nz
    for c in 0..3 {
        push(p.sh[0][c].widen());
    }
    for c in 0..3 {
        for k in 1..SH_COEFF_COUNT {
            push(p.sh[k][c].widen());
        }
    }
    push(p.opacity_logit.widen());
    push(p.log_scale.x.widen());
    push(p.log_scale.y.widen());
    push(p.log_scale.z.widen());
    for q in p.rotation {
        push(q.widen());
    }
    debug_assert_eq!(i, PLY_PROPERTY_COUNT);
    f
}

fn primitive_from_floats<T: Scalar>(f: &[f32]) -> GaussianPrimitive<T> {
    let at = |i: usize| T::of(f[i] as f64);
    let mut p = GaussianPrimitive::<T>::unit();
    p.position = crate::math::Vec3::new(at(0), at(1), at(2));
    // Indices 3..6 are normals: read and ignored.
    for c in 0..3 {
        p.sh[0][c] = at(6 + c);
    }
    for c in 0..3 {
        for k in 1..SH_COEFF_COUNT {
            p.sh[k][c] = at(9 + c * 15 + (k - 1));
        }
    }
    p.opacity_logit = at(54);
    p.log_scale = crate::math::Vec3::new(at(55), at(56), at(57));
    p.rotation = [at(58), at(59), at(60), at(61)];
    p
}

/// Writes the scene as a conforming checkpoint. Normals are written as
/// zeros; every field is truncated to float32. Non-finite fields (after
/// truncation) are rejected.
pub fn write_ply<T: Scalar>(scene: &Scene<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let names = ply_property_names();
    let mut bytes = header(scene.len()).into_bytes();
    bytes.reserve(scene.len() * PLY_VERTEX_BYTES);
    for (index, prim) in scene.primitives.iter().enumerate() {
        prim.validate(index).map_err(|source| IoError::InvalidPrimitive {
            path: path.to_path_buf(),
            source,
        })?;
        let floats = primitive_to_floats(prim);
        for (value, name) in floats.iter().zip(&names) {
            if !value.is_finite() {
                return Err(IoError::Table {
                    path: path.to_path_buf(),
                    message: format!(
                        "primitive {index}: field {name} is {value} after float32 truncation"
                    ),
                });
            }
            bytes.extend_from_slice(&value.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(IoError::file(path))
}

fn header_error(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::MalformedHeader {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a conforming checkpoint. The header must match the canonical
/// layout exactly; the payload must hold exactly `N` vertices.
pub fn read_ply<T: Scalar>(path: impl AsRef<Path>) -> Result<Scene<T>, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(IoError::file(path))?;

    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut next_line = || -> Result<String, IoError> {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| header_error(path, line_no, "header ends without end_header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| header_error(path, line_no, "header is not valid ASCII"))?
            .to_string();
        offset += end + 1;
        line_no += 1;
        Ok(line)
    };

    if next_line()? != "ply" {
        return Err(header_error(path, 0, "missing 'ply' magic"));
    }
    let format = next_line()?;
    if format != "format binary_little_endian 1.0" {
        return Err(IoError::UnsupportedEncoding {
            path: path.to_path_buf(),
            found: format,
        });
    }
    let element = next_line()?;
    let count: usize = element
        .strip_prefix("element vertex ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| header_error(path, 2, format!("expected 'element vertex N', got '{element}'")))?;
    for (index, expected) in ply_property_names().into_iter().enumerate() {
        let line = next_line()?;
        let want = format!("property float {expected}");
        if line != want {
            return Err(IoError::PropertyOrderMismatch {
                path: path.to_path_buf(),
                index,
                expected: want,
                found: line,
            });
        }
    }
    let last = next_line()?;
    if last != "end_header" {
        return Err(header_error(path, line_no - 1, format!("expected 'end_header', got '{last}'")));
    }

    let payload = &bytes[offset..];
    let expected = count * PLY_VERTEX_BYTES;
    if payload.len() < expected {
        return Err(IoError::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(IoError::TrailingBytes {
            path: path.to_path_buf(),
            extra: payload.len() - expected,
        });
    }

    let mut primitives = Vec::with_capacity(count);
    let mut floats = [0.0f32; PLY_PROPERTY_COUNT];
    for vertex in payload.chunks_exact(PLY_VERTEX_BYTES) {
        for (slot, raw) in floats.iter_mut().zip(vertex.chunks_exact(4)) {
            *slot = f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]);
        }
        primitives.push(primitive_from_floats::<T>(&floats));
    }
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string());
    let scene = Scene::new(primitives, tag);
    scene.validate().map_err(|source| IoError::InvalidPrimitive {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(scene)
}
