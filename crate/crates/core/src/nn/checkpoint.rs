use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MlpModel, NnError, TrainConfig};
use crate::dataset::Standardizer;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to reload a trained estimator and apply it to raw counts.
///
/// Stored as JSON; floats are written in shortest round-trip form, so a
/// save/load cycle is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub widths: Vec<usize>,
    pub model: MlpModel,
    /// Input scaling and target coding (including the target mode).
    pub standardizer: Standardizer,
    pub train_config: TrainConfig,
    /// Named seeds, e.g. `simulation`, `split`, `init`, `shuffle`.
    pub seeds: BTreeMap<String, u64>,
}

impl Checkpoint {
    pub fn new(model: MlpModel, standardizer: Standardizer, train_config: TrainConfig, seeds: BTreeMap<String, u64>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            widths: model.widths(),
            model,
            standardizer,
            train_config,
            seeds,
        }
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        serde_json::to_string_pretty(self).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, NnError> {
        let c: Checkpoint = serde_json::from_str(s).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported checkpoint version {}", c.version)));
        }
        let model = MlpModel::from_layers(c.model.layers.clone())?;
        if model.widths() != c.widths {
            return Err(NnError::Checkpoint(format!("widths {:?} do not match parameters {:?}", c.widths, model.widths())));
        }
        if c.standardizer.mean.len() != model.input_width() || c.standardizer.std.len() != model.input_width() {
            return Err(NnError::Checkpoint("standardizer arity does not match the model".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
