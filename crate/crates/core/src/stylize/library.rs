//! Tileable texture library loaded from a directory manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scene::ElementClass;

pub const MANIFEST: &str = "manifest.json";

/// One manifest record. An empty `classes` list fits every element class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureEntry {
    pub id: String,
    pub path: PathBuf,
    #[serde(default = "unit_tiling")]
    pub tiling: f64,
    #[serde(default)]
    pub classes: Vec<ElementClass>,
}

fn unit_tiling() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub entry: TextureEntry,
    pub image: Raster,
}

impl Texture {
    pub fn fits(&self, class: ElementClass) -> bool {
        self.entry.classes.is_empty() || self.entry.classes.contains(&class)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureLibrary {
    textures: Vec<Texture>,
}

impl TextureLibrary {
    pub fn new(textures: Vec<Texture>) -> Result<Self> {
        if textures.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        for t in &textures {
            if !(t.entry.tiling > 0.0 && t.entry.tiling.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "texture {} has tiling {}",
                    t.entry.id, t.entry.tiling
                )));
            }
            t.image.check()?;
        }
        let mut ids: Vec<&str> = textures.iter().map(|t| t.entry.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "duplicate texture id {}",
                w[0]
            )));
        }
        Ok(TextureLibrary { textures })
    }

    /// Reads `dir/manifest.json` (a JSON array of [`TextureEntry`]) and the
    /// images it names, relative to `dir`. A missing manifest means an empty
    /// library.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = dir.join(MANIFEST);
        if !manifest.is_file() {
            return Err(Error::EmptyLibrary);
        }
        let entries: Vec<TextureEntry> = serde_json::from_str(&std::fs::read_to_string(&manifest)?)
            .map_err(|e| Error::parse(manifest.display().to_string(), e.to_string()))?;
        let textures = entries
            .into_iter()
            .map(|entry| {
                let image = Raster::load(&dir.join(&entry.path))?;
                Ok(Texture { entry, image })
            })
            .collect::<Result<Vec<_>>>()?;
        TextureLibrary::new(textures)
    }

    /// Writes images as PNG plus the manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        for t in &self.textures {
            t.image.save_png(&dir.join(&t.entry.path))?;
        }
        let entries: Vec<&TextureEntry> = self.textures.iter().map(|t| &t.entry).collect();
        crate::io::write_atomic(
            &dir.join(MANIFEST),
            serde_json::to_string_pretty(&entries)?.as_bytes(),
        )
    }

    pub fn len(&self) -> usize {
        self.textures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.textures.is_empty()
    }

    pub fn textures(&self) -> &[Texture] {
        &self.textures
    }

    pub fn get(&self, id: &str) -> Option<&Texture> {
        self.textures.iter().find(|t| t.entry.id == id)
    }

    /// Indices of textures usable on `class`.
    pub fn compatible(&self, class: ElementClass) -> Vec<usize> {
        (0..self.textures.len())
            .filter(|&i| self.textures[i].fits(class))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(id: &str, color: [f64; 3], classes: Vec<ElementClass>) -> Texture {
        Texture {
            entry: TextureEntry {
                id: id.into(),
                path: format!("{id}.png").into(),
                tiling: 1.0,
                classes,
            },
            image: Raster::filled(4, 4, color),
        }
    }

    #[test]
    fn round_trips_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let lib = TextureLibrary::new(vec![
            texture("oak", [0.6, 0.4, 0.2], vec![ElementClass::Floor]),
            texture("plaster", [0.8, 0.8, 0.8], vec![]),
        ])
        .unwrap();
        lib.save(dir.path()).unwrap();
        let back = TextureLibrary::load(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.compatible(ElementClass::Wall), vec![1]);
        assert_eq!(back.compatible(ElementClass::Floor), vec![0, 1]);
        assert_eq!(
            back.get("oak").unwrap().image.to_rgb8(),
            lib.get("oak").unwrap().image.to_rgb8()
        );
    }

    #[test]
    fn missing_or_empty_library_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            TextureLibrary::load(&dir.path().join("nope")),
            Err(Error::EmptyLibrary)
        ));
        assert!(matches!(
            TextureLibrary::new(vec![]),
            Err(Error::EmptyLibrary)
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let t = texture("a", [0.1; 3], vec![]);
        assert!(TextureLibrary::new(vec![t.clone(), t]).is_err());
    }
}
