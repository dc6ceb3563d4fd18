//! Polyline-subgraph + global-attention motion predictor.
//!
//! Each polyline is encoded by a stack of per-vector linear+ReLU layers whose
//! outputs are concatenated with their element-wise maximum over the
//! polyline; the polyline feature is the element-wise maximum of the last
//! layer. A single-head scaled dot-product attention over all polyline
//! features, queried by the Ego node, feeds an MLP decoder that emits the 24
//! Ego displacement vectors.
//!
//! All arithmetic is generic over [`Real`] (`f32` or `f64`); the backward pass
//! is written out by hand and checked against central finite differences by
//! [`grad_check`].

mod gradcheck;
mod model;
mod network;
mod train;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, FD_STEP, GRADCHECK_SEED};
pub use model::{ParamBlock, PredictorModel};
pub use network::{loss, SceneInput};
pub use train::{train, EpochLoss, TrainOutcome};

use core::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

use crate::vectorizer::TARGET_STEPS;

/// Floating-point type the predictor can run in.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {
    const PRECISION: Precision;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

/// Input feature scaling: coordinates are divided by this many metres.
pub const COORD_SCALE: f64 = 10.0;
/// Timestamps are divided by this many seconds.
pub const TIME_SCALE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictorError {
    #[error("invalid model config: {0}")]
    InvalidConfig(&'static str),
    #[error("polyline {0} has no vectors")]
    EmptyPolyline(usize),
    #[error("scene has no Ego polyline")]
    NoEgo,
    #[error("ego index {index} out of range for {count} polylines")]
    BadEgoIndex { index: usize, count: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("parameter vector has {got} values, config needs {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("gradient check requires double precision")]
    PrecisionRequired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub subgraph_layers: usize,
    pub attention_heads: usize,
    pub output_steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_seed: u64,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            subgraph_layers: 3,
            attention_heads: 1,
            output_steps: TARGET_STEPS,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 60,
            init_seed: 0,
            precision: Precision::Double,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.hidden_dim == 0 {
            return Err(PredictorError::InvalidConfig("hidden_dim must be at least 1"));
        }
        if self.subgraph_layers == 0 {
            return Err(PredictorError::InvalidConfig("subgraph_layers must be at least 1"));
        }
        if self.attention_heads != 1 {
            return Err(PredictorError::InvalidConfig("only a single attention head is supported"));
        }
        if self.output_steps != TARGET_STEPS {
            return Err(PredictorError::InvalidConfig("output_steps is fixed at 24"));
        }
        if self.batch_size == 0 {
            return Err(PredictorError::InvalidConfig("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(PredictorError::InvalidConfig("learning_rate must be positive"));
        }
        Ok(())
    }
}
