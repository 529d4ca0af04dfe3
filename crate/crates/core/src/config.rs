//! Style inputs and optimizer schedules.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const DEFAULT_LAMBDA1: f64 = 0.2;
pub const DEFAULT_LAMBDA2: f64 = 0.2;
pub const DEFAULT_LAMBDA3: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_MERGE_THRESHOLD: f64 = 3.0;

/// Scalar weights of the style objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleWeights {
    /// Clip weight for structure retrieval.
    pub lambda1: f64,
    /// Per-object clip weight for base colors.
    pub lambda2: f64,
    /// Whole-scene clip weight for base colors.
    pub lambda3: f64,
    /// Weight of the histogram term for base colors.
    pub hist_weight: f64,
    /// Residual color range of the style field.
    pub alpha: f64,
    /// ΔE76 merge threshold for part discovery.
    pub merge_threshold: f64,
}

impl Default for StyleWeights {
    fn default() -> Self {
        StyleWeights {
            lambda1: DEFAULT_LAMBDA1,
            lambda2: DEFAULT_LAMBDA2,
            lambda3: DEFAULT_LAMBDA3,
            hist_weight: 1.0,
            alpha: DEFAULT_ALPHA,
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
        }
    }
}

impl StyleWeights {
    pub fn check(&self) -> Result<()> {
        let named = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("hist_weight", self.hist_weight),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold.is_finite()) {
            return Err(Error::InvalidConfig("merge_threshold must be > 0".into()));
        }
        Ok(())
    }
}

/// Target image, appearance style text and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleSpec {
    pub target_image: Raster,
    pub style_text: String,
    pub weights: StyleWeights,
}

impl StyleSpec {
    pub fn new(target_image: Raster, style_text: impl Into<String>) -> Result<Self> {
        let spec = StyleSpec {
            target_image,
            style_text: style_text.into(),
            weights: StyleWeights::default(),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.target_image.is_empty() {
            return Err(Error::InvalidConfig("target image is empty".into()));
        }
        self.target_image.check()?;
        self.weights.check()
    }

    /// Loads a style JSON; the image path is relative to the JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let file: StyleFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let image = Raster::load(&base.join(&file.target_image))?;
        let spec = StyleSpec {
            target_image: image,
            style_text: file.style_text,
            weights: file.weights,
        };
        spec.check()?;
        Ok(spec)
    }
}

/// On-disk layout of a style spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StyleFile {
    pub target_image: PathBuf,
    #[serde(default)]
    pub style_text: String,
    #[serde(default, flatten)]
    pub weights: StyleWeights,
}

/// Adam schedule: `initial_lr * decay_factor^(step / decay_every)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub initial_lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            initial_lr: 5e-4,
            decay_factor: 0.9,
            decay_every: 100,
            iterations: 300,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.initial_lr = lr;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidConfig("initial_lr must be > 0".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::InvalidConfig(
                "decay_factor must be in (0, 1]".into(),
            ));
        }
        if self.decay_every == 0 {
            return Err(Error::InvalidConfig("decay_every must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        self.initial_lr * self.decay_factor.powi((step / self.decay_every) as i32)
    }
}
