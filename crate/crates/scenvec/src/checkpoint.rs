//! Predictor checkpoints: config, shape manifest and the flat parameter array
//! in one JSON document.

use std::path::{Path, PathBuf};

use scenvec_core::predictor::{ParamBlock, PredictorModel, Real};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ModelSection, PrecisionName};
use crate::json;

pub const CHECKPOINT_FORMAT: &str = "scenvec-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("not a checkpoint (format {0:?}, version {1})")]
    Format(String, u32),
    #[error("checkpoint holds {found:?} parameters, {expected:?} requested")]
    Precision { expected: PrecisionName, found: PrecisionName },
    #[error("shape manifest does not match the model config")]
    Manifest,
    #[error("{0}")]
    Model(#[from] scenvec_core::predictor::PredictorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl From<ParamBlock> for BlockEntry {
    fn from(b: ParamBlock) -> Self {
        Self {
            name: b.name,
            rows: b.rows,
            cols: b.cols,
            offset: b.offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelSection,
    pub blocks: Vec<BlockEntry>,
    /// Parameters widened to `f64`; single-precision values convert exactly.
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model<T: Real>(model: &PredictorModel<T>) -> Self {
        let mut section = ModelSection::from(*model.config());
        section.precision = T::PRECISION.into();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: section,
            blocks: model.blocks().into_iter().map(BlockEntry::from).collect(),
            params: model.params().iter().map(|p| p.to_f64().unwrap()).collect(),
        }
    }

    pub fn into_model<T: Real>(self) -> Result<PredictorModel<T>, CheckpointError> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Format(self.format, self.version));
        }
        let wanted = PrecisionName::from(T::PRECISION);
        if self.model.precision != wanted {
            return Err(CheckpointError::Precision {
                expected: wanted,
                found: self.model.precision,
            });
        }
        let config = self.model.into();
        let params = self.params.iter().map(|&p| T::lit(p)).collect();
        let model = PredictorModel::from_params(&config, params)?;
        let manifest: Vec<BlockEntry> = model.blocks().into_iter().map(BlockEntry::from).collect();
        if manifest != self.blocks {
            return Err(CheckpointError::Manifest);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let text = json::to_pretty(self).expect("checkpoints always serialize");
        std::fs::write(path, text + "\n").map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CheckpointError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenvec_core::predictor::ModelConfig;

    #[test]
    fn double_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let config = ModelConfig { hidden_dim: 6, init_seed: 12, ..ModelConfig::default() };
        let model = PredictorModel::<f64>::new(&config).unwrap();
        Checkpoint::from_model(&model).save(&path).unwrap();
        let back: PredictorModel<f64> = Checkpoint::load(&path).unwrap().into_model().unwrap();
        let bits = |m: &PredictorModel<f64>| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&model));
        assert_eq!(back.config(), model.config());
    }

    #[test]
    fn single_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let config = ModelConfig { hidden_dim: 5, ..ModelConfig::default() };
        let model = PredictorModel::<f32>::new(&config).unwrap();
        Checkpoint::from_model(&model).save(&path).unwrap();
        let back: PredictorModel<f32> = Checkpoint::load(&path).unwrap().into_model().unwrap();
        assert_eq!(back.params(), model.params());
        let wrong = Checkpoint::load(&path).unwrap().into_model::<f64>();
        assert!(matches!(wrong, Err(CheckpointError::Precision { .. })));
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let model = PredictorModel::<f64>::new(&ModelConfig { hidden_dim: 3, ..ModelConfig::default() }).unwrap();
        let mut c = Checkpoint::from_model(&model);
        c.blocks[1].rows += 1;
        assert!(matches!(c.into_model::<f64>(), Err(CheckpointError::Manifest)));
        let mut c = Checkpoint::from_model(&model);
        c.params.pop();
        assert!(matches!(c.into_model::<f64>(), Err(CheckpointError::Model(_))));
    }
}
