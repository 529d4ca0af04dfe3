//! The embedding backend interface and its configuration.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mock::{MockOracleBackend, MockTable};
use super::process::ProcessBackend;
use crate::error::{Error, Result};
use crate::raster::{ImageGrad, Raster};

/// Environment variable naming the encoder weights path.
pub const WEIGHTS_ENV: &str = "SCENESTYLE_ENCODER_WEIGHTS";
/// Environment variable overriding the encoder command line.
pub const COMMAND_ENV: &str = "SCENESTYLE_ENCODER_CMD";

/// Paired image and text encoders into one `dim`-dimensional space.
pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed_image(&self, image: &Raster) -> Result<Vec<f64>>;

    fn embed_text(&self, text: &str) -> Result<Vec<f64>>;

    /// `Jᵀ g` for the Jacobian of [`EmbeddingBackend::embed_image`] at `image`.
    fn image_vjp(&self, image: &Raster, grad: &[f64]) -> Result<ImageGrad>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Real,
    #[default]
    Mock,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(BackendKind::Real),
            "mock" => Ok(BackendKind::Mock),
            other => Err(Error::InvalidConfig(format!(
                "unknown backend {other:?}; expected real or mock"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub backend: BackendKind,
    /// Encoder weights; falls back to `SCENESTYLE_ENCODER_WEIGHTS`.
    pub weights: Option<PathBuf>,
    /// Encoder command line; falls back to `SCENESTYLE_ENCODER_CMD`, then
    /// `python3 tools/clip_encoder.py`.
    pub command: Option<Vec<String>>,
    /// Prompt substring to color(s) table for the mock.
    pub mock_table: MockTable,
}

impl BackendConfig {
    pub fn mock(table: MockTable) -> Self {
        BackendConfig {
            mock_table: table,
            ..BackendConfig::default()
        }
    }

    pub fn build(&self) -> Result<Arc<dyn EmbeddingBackend>> {
        match self.backend {
            BackendKind::Mock => Ok(Arc::new(MockOracleBackend::new(&self.mock_table)?)),
            BackendKind::Real => {
                let weights = self
                    .weights
                    .clone()
                    .or_else(|| std::env::var_os(WEIGHTS_ENV).map(PathBuf::from))
                    .ok_or_else(|| {
                        Error::BackendFailure(format!(
                            "no encoder weights configured (set {WEIGHTS_ENV})"
                        ))
                    })?;
                let mut command = match (&self.command, std::env::var(COMMAND_ENV)) {
                    (Some(c), _) => c.clone(),
                    (None, Ok(c)) => c.split_whitespace().map(String::from).collect(),
                    (None, Err(_)) => vec!["python3".into(), "tools/clip_encoder.py".into()],
                };
                command.push("--weights".into());
                command.push(weights.display().to_string());
                Ok(Arc::new(ProcessBackend::spawn(&command)?))
            }
        }
    }
}
