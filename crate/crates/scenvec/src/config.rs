//! Experiment configuration file.
//!
//! Every section and field is optional; missing values take the defaults
//! below and unknown keys are rejected. Command-line flags override the file.
//!
//! | key | default |
//! |-----|---------|
//! | `generation.counts` | 4000 per kind |
//! | `generation.seeds` | ACC 1, LK 2, ACC&LK 3 |
//! | `sim.*` | vehicle, controller and noise constants of the simulator |
//! | `model.*` | hidden 32, 3 subgraph layers, 1 head, lr 1e-3, batch 32, 60 epochs, seed 0, double |
//! | `mixes` | the ten reference mixes, selection seeds 0 |
//! | `baseline` | 100 trees, min 2 samples per leaf, all features, seed 0, 2000 training rows |
//! | `test_size` | 1000 per kind |
//! | `out_dir` | `scenvec-out` |

use std::path::{Path, PathBuf};

use scenvec_core::metamodel::TreeParams;
use scenvec_core::predictor::{ModelConfig, Precision};
use scenvec_core::simulator::SimParams;
use scenvec_core::ScenarioKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{MixSpec, DEFAULT_TEST_SIZE};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One value per scenario kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerKind<T> {
    pub acc: T,
    pub lk: T,
    pub acc_lk: T,
}

impl<T: Copy> PerKind<T> {
    pub fn get(&self, kind: ScenarioKind) -> T {
        match kind {
            ScenarioKind::Acc => self.acc,
            ScenarioKind::Lk => self.lk,
            ScenarioKind::AccLk => self.acc_lk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub counts: PerKind<u64>,
    pub seeds: PerKind<u64>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            counts: PerKind { acc: 4000, lk: 4000, acc_lk: 4000 },
            seeds: PerKind { acc: 1, lk: 2, acc_lk: 3 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub acc_gain: f64,
    pub time_gap: f64,
    pub accel_bounds: [f64; 2],
    pub wheelbase: f64,
    pub lookahead_min: f64,
    pub lookahead_factor: f64,
    pub ego_x0: f64,
    pub orientation_noise_bound: f64,
    pub co_speed_noise_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimParams::default().into()
    }
}

impl From<SimParams> for SimConfig {
    fn from(p: SimParams) -> Self {
        Self {
            dt: p.dt,
            horizon: p.horizon,
            acc_gain: p.acc_gain,
            time_gap: p.time_gap,
            accel_bounds: p.accel_bounds,
            wheelbase: p.wheelbase,
            lookahead_min: p.lookahead_min,
            lookahead_factor: p.lookahead_factor,
            ego_x0: p.ego_x0,
            orientation_noise_bound: p.orientation_noise_bound,
            co_speed_noise_bound: p.co_speed_noise_bound,
        }
    }
}

impl From<SimConfig> for SimParams {
    fn from(c: SimConfig) -> Self {
        Self {
            dt: c.dt,
            horizon: c.horizon,
            acc_gain: c.acc_gain,
            time_gap: c.time_gap,
            accel_bounds: c.accel_bounds,
            wheelbase: c.wheelbase,
            lookahead_min: c.lookahead_min,
            lookahead_factor: c.lookahead_factor,
            ego_x0: c.ego_x0,
            orientation_noise_bound: c.orientation_noise_bound,
            co_speed_noise_bound: c.co_speed_noise_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionName {
    Single,
    Double,
}

impl From<PrecisionName> for Precision {
    fn from(p: PrecisionName) -> Self {
        match p {
            PrecisionName::Single => Precision::Single,
            PrecisionName::Double => Precision::Double,
        }
    }
}

impl From<Precision> for PrecisionName {
    fn from(p: Precision) -> Self {
        match p {
            Precision::Single => PrecisionName::Single,
            Precision::Double => PrecisionName::Double,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub subgraph_layers: usize,
    pub attention_heads: usize,
    pub output_steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_seed: u64,
    pub precision: PrecisionName,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelConfig::default().into()
    }
}

impl From<ModelConfig> for ModelSection {
    fn from(c: ModelConfig) -> Self {
        Self {
            hidden_dim: c.hidden_dim,
            subgraph_layers: c.subgraph_layers,
            attention_heads: c.attention_heads,
            output_steps: c.output_steps,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            epochs: c.epochs,
            init_seed: c.init_seed,
            precision: c.precision.into(),
        }
    }
}

impl From<ModelSection> for ModelConfig {
    fn from(s: ModelSection) -> Self {
        Self {
            hidden_dim: s.hidden_dim,
            subgraph_layers: s.subgraph_layers,
            attention_heads: s.attention_heads,
            output_steps: s.output_steps,
            learning_rate: s.learning_rate,
            batch_size: s.batch_size,
            epochs: s.epochs,
            init_seed: s.init_seed,
            precision: s.precision.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub num_trees: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: Option<usize>,
    pub seed: u64,
    /// Training rows per kind.
    pub train_size: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let t = TreeParams::default();
        Self {
            num_trees: t.num_trees,
            min_samples_leaf: t.min_samples_leaf,
            features_per_split: t.features_per_split,
            seed: t.seed,
            train_size: 2000,
        }
    }
}

impl BaselineConfig {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            num_trees: self.num_trees,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generation: GenerationConfig,
    pub sim: SimConfig,
    pub model: ModelSection,
    pub mixes: Vec<MixSpec>,
    pub baseline: BaselineConfig,
    pub test_size: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generation: GenerationConfig::default(),
            sim: SimConfig::default(),
            model: ModelSection::default(),
            mixes: MixSpec::table_rows(),
            baseline: BaselineConfig::default(),
            test_size: DEFAULT_TEST_SIZE,
            out_dir: PathBuf::from("scenvec-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn sim_params(&self) -> SimParams {
        self.sim.into()
    }

    pub fn model_config(&self) -> ModelConfig {
        self.model.into()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sim = self.sim_params().violations();
        if !sim.is_empty() {
            return Err(ConfigError::Invalid(format!("sim: {}", sim.join("; "))));
        }
        self.model_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("model: {e}")))?;
        if self.baseline.num_trees == 0 || self.baseline.min_samples_leaf == 0 || self.baseline.train_size == 0 {
            return Err(ConfigError::Invalid(
                "baseline: num_trees, min_samples_leaf and train_size must be positive".into(),
            ));
        }
        if let Some((i, _)) = self.mixes.iter().enumerate().find(|(_, m)| m.total() == 0) {
            return Err(ConfigError::Invalid(format!("mix {} requests no records", i + 1)));
        }
        Ok(())
    }

    /// Mix by 1-based row number.
    pub fn mix(&self, row: usize) -> Option<&MixSpec> {
        row.checked_sub(1).and_then(|i| self.mixes.get(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.mixes.len(), 10);
        assert_eq!(c.model_config(), ModelConfig::default());
        assert_eq!(c.sim_params(), SimParams::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [r#"{"bogus": 1}"#, r#"{"model": {"hidden": 3}}"#, r#"{"mixes": [{"n_acc": 1, "n_lk": 0, "n_acc_lk": 0, "x": 1}]}"#] {
            assert!(serde_json::from_str::<ExperimentConfig>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"model": {"epochs": 3, "precision": "single"}, "test_size": 10}"#).unwrap();
        assert_eq!(c.model.epochs, 3);
        assert_eq!(c.model_config().precision, Precision::Single);
        assert_eq!(c.model.hidden_dim, 32);
        assert_eq!(c.test_size, 10);
    }

    #[test]
    fn invalid_values_are_reported() {
        let mut c = ExperimentConfig::default();
        c.model.output_steps = 12;
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        let mut c = ExperimentConfig::default();
        c.mixes.push(MixSpec::new(0, 0, 0));
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(m)) if m.contains("mix 11")));
    }

    #[test]
    fn mix_rows_are_one_based() {
        let c = ExperimentConfig::default();
        assert_eq!(c.mix(9).unwrap().total(), 4200);
        assert!(c.mix(0).is_none());
        assert!(c.mix(11).is_none());
    }
}
