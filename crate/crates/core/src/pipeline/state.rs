//! Persisted pipeline progress.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Stage;
use crate::error::{Error, Result};
use crate::geometry::PartLabeling;
use crate::io::write_atomic;
use crate::stylize::{BaseColorTable, StructureAssignment};

/// Files of one trained field, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldArtifact {
    pub checkpoint: PathBuf,
    pub colors: PathBuf,
    pub steps: usize,
    /// Binds the artifact to its inputs; a mismatch means retrain.
    pub hash: String,
}

/// Stage outputs plus the input hash each completed stage ran under.
///
/// A stage's outputs are present iff it appears in `completed`, except
/// `fields`, which may hold a partial set while detail is incomplete.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineState {
    /// Hash of the scene, style, backend and seed.
    pub manifest: String,
    pub completed: BTreeMap<Stage, String>,
    pub structure: Option<StructureAssignment>,
    pub labelings: Option<BTreeMap<String, PartLabeling>>,
    pub base_colors: Option<BaseColorTable>,
    pub fields: BTreeMap<String, FieldArtifact>,
    pub exports: Option<Vec<PathBuf>>,
    /// Loss curves and audit logs written by each stage.
    pub logs: BTreeMap<Stage, Vec<PathBuf>>,
}

impl PipelineState {
    pub fn new(manifest: String) -> Self {
        PipelineState {
            manifest,
            ..PipelineState::default()
        }
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.completed.contains_key(&stage)
    }

    /// Whether the stage's own outputs are held.
    pub fn has_outputs(&self, stage: Stage) -> bool {
        match stage {
            Stage::Structure => self.structure.is_some(),
            Stage::Parts => self.labelings.is_some(),
            Stage::BaseColors => self.base_colors.is_some(),
            Stage::Detail => !self.fields.is_empty(),
            Stage::Export => self.exports.is_some(),
        }
    }

    /// Drops the outputs of `stage` (fields are kept; they carry hashes).
    pub fn clear(&mut self, stage: Stage) {
        self.completed.remove(&stage);
        self.logs.remove(&stage);
        match stage {
            Stage::Structure => self.structure = None,
            Stage::Parts => self.labelings = None,
            Stage::BaseColors => self.base_colors = None,
            Stage::Detail => {}
            Stage::Export => self.exports = None,
        }
    }

    pub fn check(&self) -> Result<()> {
        for stage in Stage::ALL {
            if self.is_done(stage) && !self.has_outputs(stage) {
                return Err(Error::InvalidConfig(format!(
                    "stage {stage} is marked done without outputs"
                )));
            }
            if stage != Stage::Detail && !self.is_done(stage) && self.has_outputs(stage) {
                return Err(Error::InvalidConfig(format!(
                    "stage {stage} has outputs but is not marked done"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: PipelineState = serde_json::from_str(text)
            .map_err(|e| Error::parse("pipeline state", e.to_string()))?;
        state.check()?;
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        PipelineState::from_json(&std::fs::read_to_string(path)?)
    }
}
