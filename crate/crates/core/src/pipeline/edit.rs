//! Scene edits applied to already stylized objects at export time.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edit {
    /// Translates the object; colors are untouched.
    Relocate {
        object: String,
        offset: [f64; 3],
    },
    Remove {
        object: String,
    },
    /// Adds a translated copy named `{object}_copy{k}`.
    Replicate {
        object: String,
        offset: [f64; 3],
    },
}

impl Edit {
    pub fn object(&self) -> &str {
        match self {
            Edit::Relocate { object, .. }
            | Edit::Remove { object }
            | Edit::Replicate { object, .. } => object,
        }
    }

    /// Parses `"obj3:dx=1.0,dz=-0.5"`; the offset part may be omitted.
    pub fn parse_offset(spec: &str) -> Result<(String, [f64; 3])> {
        let bad = |m: String| Error::InvalidConfig(format!("edit {spec:?}: {m}"));
        let (object, rest) = spec.split_once(':').unwrap_or((spec, ""));
        if object.is_empty() {
            return Err(bad("missing object id".into()));
        }
        let mut offset = [0.0; 3];
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            let axis = match key.trim() {
                "dx" => 0,
                "dy" => 1,
                "dz" => 2,
                k => return Err(bad(format!("unknown key {k:?}"))),
            };
            offset[axis] = value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("bad number {value:?}")))?;
        }
        Ok((object.to_string(), offset))
    }

    pub fn relocate(spec: &str) -> Result<Edit> {
        let (object, offset) = Edit::parse_offset(spec)?;
        Ok(Edit::Relocate { object, offset })
    }

    pub fn replicate(spec: &str) -> Result<Edit> {
        let (object, offset) = Edit::parse_offset(spec)?;
        Ok(Edit::Replicate { object, offset })
    }

    pub fn remove(spec: &str) -> Result<Edit> {
        match Edit::parse_offset(spec)? {
            (object, [0.0, 0.0, 0.0]) => Ok(Edit::Remove { object }),
            _ => Err(Error::InvalidConfig(format!(
                "remove takes no offset: {spec:?}"
            ))),
        }
    }
}

/// `relocate:SPEC`, `replicate:SPEC` or `remove:ID`.
impl FromStr for Edit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("relocate", rest)) => Edit::relocate(rest),
            Some(("replicate", rest)) => Edit::replicate(rest),
            Some(("remove", rest)) => Edit::remove(rest),
            _ => Err(Error::InvalidConfig(format!("unknown edit {s:?}"))),
        }
    }
}

/// A stylized object ready to write: world-space mesh and vertex colors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportObject {
    pub id: String,
    pub mesh: TriangleMesh,
    pub colors: Vec<[f64; 3]>,
}

fn translated(mesh: &TriangleMesh, offset: [f64; 3]) -> TriangleMesh {
    let mut m = mesh.clone();
    let t = Vec3::from(offset);
    for v in &mut m.vertices {
        *v += t;
    }
    m
}

/// Applies edits in order. Each must name an object present at that point.
pub fn apply_edits(mut objects: Vec<ExportObject>, edits: &[Edit]) -> Result<Vec<ExportObject>> {
    for edit in edits {
        let i = objects
            .iter()
            .position(|o| o.id == edit.object())
            .ok_or_else(|| {
                Error::InvalidConfig(format!("edit names unknown object {:?}", edit.object()))
            })?;
        match edit {
            Edit::Relocate { offset, .. } => {
                objects[i].mesh = translated(&objects[i].mesh, *offset)
            }
            Edit::Remove { .. } => {
                objects.remove(i);
            }
            Edit::Replicate { object, offset } => {
                let k = (1..)
                    .find(|k| objects.iter().all(|o| o.id != format!("{object}_copy{k}")))
                    .expect("unbounded");
                let copy = ExportObject {
                    id: format!("{object}_copy{k}"),
                    mesh: translated(&objects[i].mesh, *offset),
                    colors: objects[i].colors.clone(),
                };
                objects.push(copy);
            }
        }
    }
    Ok(objects)
}
