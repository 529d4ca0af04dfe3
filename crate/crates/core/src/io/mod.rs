//! Mesh files (OBJ, PLY) and the scene config document.

pub mod obj;
pub mod ply;
pub mod scene_file;

use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// A mesh read from disk plus the optional per-vertex data the file carried.
#[derive(Debug, Clone)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    pub uv: Option<Vec<[f64; 2]>>,
    pub colors: Option<Vec<[f64; 3]>>,
    pub group_names: Vec<String>,
}

/// Loads an OBJ or PLY file, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<LoadedMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => obj::parse_obj(&std::fs::read_to_string(path)?),
        "ply" => ply::parse_ply(&std::fs::read(path)?),
        other => Err(Error::parse(
            path.display().to_string(),
            format!("unsupported mesh format {other:?}"),
        )),
    }
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
