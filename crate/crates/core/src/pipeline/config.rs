//! The pipeline config document and stage names.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::edit::Edit;
use crate::config::OptimizerConfig;
use crate::error::{Error, Result};
use crate::losses::{BackendConfig, BackendKind};
use crate::partdiscovery::DiscoveryConfig;
use crate::stylize::{BaseColorConfig, DetailConfig, DEFAULT_CANDIDATES};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Structure,
    Parts,
    BaseColors,
    Detail,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Structure,
        Stage::Parts,
        Stage::BaseColors,
        Stage::Detail,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Structure => "structure",
            Stage::Parts => "parts",
            Stage::BaseColors => "base_colors",
            Stage::Detail => "detail",
            Stage::Export => "export",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    /// Accepts `base_colors` and `base-colors` alike.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub structure: bool,
    pub parts: bool,
    pub base_colors: bool,
    pub detail: bool,
    pub export: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            structure: true,
            parts: true,
            base_colors: true,
            detail: true,
            export: true,
        }
    }
}

impl StageToggles {
    pub fn enabled(&self, stage: Stage) -> bool {
        match stage {
            Stage::Structure => self.structure,
            Stage::Parts => self.parts,
            Stage::BaseColors => self.base_colors,
            Stage::Detail => self.detail,
            Stage::Export => self.export,
        }
    }
}

/// Per-stage optimizer replacements. For parts only the learning rate and
/// iteration count apply. Seeds are always derived from the global seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOverrides {
    pub parts: Option<OptimizerConfig>,
    pub base_colors: Option<OptimizerConfig>,
    pub detail: Option<OptimizerConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreviewConfig {
    pub width: usize,
    pub height: usize,
}

impl Default for PreviewConfig {
    fn default() -> Self {
        PreviewConfig {
            width: 256,
            height: 192,
        }
    }
}

/// Everything a run depends on. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: PathBuf,
    pub style: PathBuf,
    /// Texture library directory; absent or empty halts the structure stage.
    pub library: Option<PathBuf>,
    pub backend: BackendConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub stages: StageToggles,
    pub optimizers: OptimizerOverrides,
    pub structure_candidates: usize,
    /// Defaults depend on the backend kind when absent.
    pub discovery: Option<DiscoveryConfig>,
    pub base_colors: BaseColorConfig,
    pub detail: DetailConfig,
    /// Adds the displacement branch to every field.
    pub displacement: bool,
    /// Field networks trained (and held in memory) at once.
    pub parallel_objects: usize,
    pub preview: PreviewConfig,
    /// Applied at export only.
    pub edits: Vec<Edit>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scene: PathBuf::new(),
            style: PathBuf::new(),
            library: None,
            backend: BackendConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
            stages: StageToggles::default(),
            optimizers: OptimizerOverrides::default(),
            structure_candidates: DEFAULT_CANDIDATES,
            discovery: None,
            base_colors: BaseColorConfig::default(),
            detail: DetailConfig::default(),
            displacement: false,
            parallel_objects: 1,
            preview: PreviewConfig::default(),
            edits: Vec::new(),
        }
    }
}

impl PipelineConfig {
    /// Reads a config JSON and resolves its paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        self.scene = join(&self.scene);
        self.style = join(&self.style);
        self.out = join(&self.out);
        self.library = self.library.as_ref().map(join);
        self.backend.weights = self.backend.weights.as_ref().map(join);
    }

    /// Validates values and that the scene and style files exist. The
    /// library is checked by the structure stage instead.
    pub fn check(&self) -> Result<()> {
        for (name, p) in [("scene", &self.scene), ("style", &self.style)] {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "{name} file {} not found",
                    p.display()
                )));
            }
        }
        if self.structure_candidates == 0 {
            return Err(Error::InvalidConfig(
                "structure_candidates must be >= 1".into(),
            ));
        }
        if self.parallel_objects == 0 {
            return Err(Error::InvalidConfig("parallel_objects must be >= 1".into()));
        }
        if self.preview.width == 0 || self.preview.height == 0 {
            return Err(Error::InvalidConfig("preview size must be positive".into()));
        }
        if !(self.detail.displacement_bound >= 0.0 && self.detail.displacement_bound.is_finite()) {
            return Err(Error::InvalidConfig(
                "displacement_bound must be >= 0".into(),
            ));
        }
        self.detail_settings().render.check()?;
        self.discovery_config().check()?;
        self.base_color_optimizer().check()?;
        self.detail_optimizer().check()
    }

    pub fn discovery_config(&self) -> DiscoveryConfig {
        let mut cfg = self
            .discovery
            .unwrap_or_else(|| match self.backend.backend {
                BackendKind::Mock => DiscoveryConfig::default(),
                BackendKind::Real => DiscoveryConfig::real(),
            });
        if let Some(o) = self.optimizers.parts {
            cfg.learning_rate = o.initial_lr;
            cfg.iterations = o.iterations;
        }
        cfg
    }

    pub fn base_color_optimizer(&self) -> OptimizerConfig {
        self.optimizers.base_colors.unwrap_or_default()
    }

    pub fn detail_optimizer(&self) -> OptimizerConfig {
        self.optimizers.detail.unwrap_or_default()
    }

    /// Detail settings with position gradients on when displacement is.
    pub fn detail_settings(&self) -> DetailConfig {
        let mut d = self.detail;
        d.render.position_gradients |= self.displacement;
        d
    }
}
