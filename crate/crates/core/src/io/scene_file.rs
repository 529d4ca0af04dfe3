//! The scene config document: mesh paths, labels and placements.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::load_mesh;
use crate::scene::{
    planar_uv, ElementClass, Placement, SceneDescription, SceneObject, StructureElement,
    DEFAULT_STRUCTURE_PROMPT,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub scene_type: String,
    #[serde(default = "default_structure_prompt")]
    pub structure_prompt: String,
    #[serde(default)]
    pub structure: Vec<StructureEntry>,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
}

fn default_structure_prompt() -> String {
    DEFAULT_STRUCTURE_PROMPT.to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureEntry {
    pub id: String,
    pub class: ElementClass,
    pub mesh: PathBuf,
    #[serde(default)]
    pub texture_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: String,
    pub mesh: PathBuf,
    pub class_label: String,
    #[serde(default)]
    pub description: Option<String>,
    /// Row-major 4×4; identity when absent.
    #[serde(default)]
    pub placement: Option<Vec<f64>>,
}

impl SceneFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    /// Loads every referenced mesh; relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<SceneDescription> {
        let mut structure = Vec::with_capacity(self.structure.len());
        for s in &self.structure {
            let loaded = load_mesh(&base.join(&s.mesh))?;
            let uv = loaded.uv.unwrap_or_else(|| planar_uv(&loaded.mesh));
            structure.push(StructureElement {
                id: s.id.clone(),
                class: s.class,
                mesh: loaded.mesh,
                uv,
                texture_id: s.texture_id.clone(),
            });
        }
        let mut objects = Vec::with_capacity(self.objects.len());
        for o in &self.objects {
            let loaded = load_mesh(&base.join(&o.mesh))?;
            let placement = match &o.placement {
                Some(m) => Placement::from_row_major(m)?,
                None => Placement::default(),
            };
            objects.push(SceneObject {
                id: o.id.clone(),
                class_label: o.class_label.clone(),
                description: o.description.clone(),
                mesh: loaded.mesh,
                placement,
            });
        }
        Ok(SceneDescription {
            structure,
            objects,
            scene_type: self.scene_type.clone(),
            structure_prompt: self.structure_prompt.clone(),
        })
    }
}

/// Reads a scene config and all meshes it references.
pub fn load_scene(path: &Path) -> Result<SceneDescription> {
    let file = SceneFile::read(path)?;
    file.load(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::obj::write_obj;
    use crate::synthetic;

    #[test]
    fn loads_objects_and_structure() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("cube.obj"),
            write_obj(&synthetic::cube(1.0)),
        )
        .unwrap();
        std::fs::write(
            dir.path().join("wall.obj"),
            write_obj(&synthetic::wall_quad(3.0, 2.0)),
        )
        .unwrap();
        let json = r#"{
            "scene_type": "a bedroom",
            "structure": [{"id": "w", "class": "wall", "mesh": "wall.obj"}],
            "objects": [{"id": "c", "mesh": "cube.obj", "class_label": "box",
                         "placement": [1,0,0,2, 0,1,0,0, 0,0,1,0, 0,0,0,1]}]
        }"#;
        std::fs::write(dir.path().join("scene.json"), json).unwrap();
        let desc = load_scene(&dir.path().join("scene.json")).unwrap();
        assert_eq!(desc.structure_prompt, DEFAULT_STRUCTURE_PROMPT);
        assert_eq!(desc.objects[0].placement.translation_part().x, 2.0);
        assert_eq!(
            desc.structure[0].uv.len(),
            desc.structure[0].mesh.vertex_count()
        );
    }
}
