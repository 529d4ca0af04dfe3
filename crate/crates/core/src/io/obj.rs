//! Wavefront OBJ reader. Polygons are fan-triangulated; `usemtl` blocks
//! become face groups.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::LoadedMesh;
use crate::mesh::{TriangleMesh, Vec3};

fn resolve(idx: &str, count: usize, line: usize) -> Result<usize> {
    let i: i64 = idx
        .parse()
        .map_err(|_| Error::parse(format!("obj line {line}"), format!("bad index {idx:?}")))?;
    let r = if i < 0 { count as i64 + i } else { i - 1 };
    if r < 0 || r as usize >= count {
        return Err(Error::InvalidMesh(format!(
            "obj line {line}: index {i} out of range"
        )));
    }
    Ok(r as usize)
}

pub fn parse_obj(text: &str) -> Result<LoadedMesh> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut normals_in: Vec<Vec3> = Vec::new();
    let mut uvs_in: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut groups: Vec<u32> = Vec::new();
    let mut group_names: Vec<String> = Vec::new();
    let mut current_group: Option<u32> = None;
    let mut vertex_uv: Vec<Option<[f64; 2]>> = Vec::new();
    let mut vertex_normal: Vec<Option<Vec3>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let nums = |parts: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
            parts
                .map(|p| {
                    p.parse::<f64>().map_err(|_| {
                        Error::parse(
                            format!("obj line {}", lineno + 1),
                            format!("bad number {p:?}"),
                        )
                    })
                })
                .collect()
        };
        match tag {
            "v" => {
                let v = nums(parts)?;
                if v.len() < 3 {
                    return Err(Error::parse(
                        format!("obj line {}", lineno + 1),
                        "vertex needs 3 coordinates",
                    ));
                }
                positions.push(Vec3::new(v[0], v[1], v[2]));
                vertex_uv.push(None);
                vertex_normal.push(None);
            }
            "vn" => {
                let v = nums(parts)?;
                if v.len() < 3 {
                    return Err(Error::parse(
                        format!("obj line {}", lineno + 1),
                        "normal needs 3 values",
                    ));
                }
                normals_in.push(Vec3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                let v = nums(parts)?;
                if v.len() < 2 {
                    return Err(Error::parse(
                        format!("obj line {}", lineno + 1),
                        "uv needs 2 values",
                    ));
                }
                uvs_in.push([v[0], v[1]]);
            }
            "usemtl" => {
                let name = parts.collect::<Vec<_>>().join(" ");
                let id = match group_names.iter().position(|g| *g == name) {
                    Some(i) => i,
                    None => {
                        group_names.push(name);
                        group_names.len() - 1
                    }
                };
                current_group = Some(id as u32);
            }
            "f" => {
                let mut corners = Vec::new();
                for token in parts {
                    let mut fields = token.split('/');
                    let v = resolve(fields.next().unwrap_or(""), positions.len(), lineno + 1)?;
                    if let Some(t) = fields.next().filter(|t| !t.is_empty()) {
                        let t = resolve(t, uvs_in.len(), lineno + 1)?;
                        vertex_uv[v].get_or_insert(uvs_in[t]);
                    }
                    if let Some(n) = fields.next().filter(|n| !n.is_empty()) {
                        let n = resolve(n, normals_in.len(), lineno + 1)?;
                        vertex_normal[v].get_or_insert(normals_in[n]);
                    }
                    corners.push(v);
                }
                if corners.len() < 3 {
                    return Err(Error::parse(
                        format!("obj line {}", lineno + 1),
                        "face needs 3 corners",
                    ));
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                    groups.push(current_group.unwrap_or(0));
                }
            }
            _ => {}
        }
    }

    let mut mesh = TriangleMesh::new(positions, faces)?;
    if vertex_normal.iter().all(|n| n.is_some()) {
        mesh.normals = vertex_normal
            .into_iter()
            .zip(mesh.normals.iter())
            .map(|(n, fallback)| {
                let n = n.unwrap();
                if n.norm() > 1e-12 {
                    n.normalize()
                } else {
                    *fallback
                }
            })
            .collect();
    }
    if !group_names.is_empty() {
        mesh = mesh.with_face_groups(groups)?;
    }
    let uv = if vertex_uv.iter().all(|u| u.is_some()) && !uvs_in.is_empty() {
        Some(vertex_uv.into_iter().map(|u| u.unwrap()).collect())
    } else {
        None
    };
    Ok(LoadedMesh {
        mesh,
        uv,
        colors: None,
        group_names,
    })
}

/// Serializes a mesh as OBJ, with `usemtl g{id}` blocks when groups exist.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    let mut last: Option<u32> = None;
    for (f, face) in mesh.faces.iter().enumerate() {
        if let Some(groups) = &mesh.face_groups {
            if last != Some(groups[f]) {
                let _ = writeln!(out, "usemtl g{}", groups[f]);
                last = Some(groups[f]);
            }
        }
        let _ = writeln!(out, "f {} {} {}", face[0] + 1, face[1] + 1, face[2] + 1);
    }
    out
}
