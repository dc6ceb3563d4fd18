use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{ModelConfig, PredictorError, Real};
use crate::rng::{Purpose, Substream, UnitSource};
use crate::vectorizer::{FEATURES, TARGET_STEPS};

/// One named weight matrix or bias vector inside the flat parameter array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Weight and optional bias blocks of one affine map.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Affine {
    pub w: usize,
    pub b: Option<usize>,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub blocks: Vec<ParamBlock>,
    pub encoder: Vec<Affine>,
    pub query: Affine,
    pub key: Affine,
    pub value: Affine,
    pub hidden: Affine,
    pub output: Affine,
    pub total: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig) -> Self {
        let h = config.hidden_dim;
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut affine = |name: &str, rows: usize, cols: usize, bias: bool| {
            let w = offset;
            blocks.push(ParamBlock { name: format!("{name}.weight"), rows, cols, offset });
            offset += rows * cols;
            let b = bias.then(|| {
                blocks.push(ParamBlock { name: format!("{name}.bias"), rows, cols: 1, offset });
                offset += rows;
                offset - rows
            });
            Affine { w, b, rows, cols }
        };
        let encoder = (0..config.subgraph_layers)
            .map(|l| affine(&format!("encoder.{l}"), h, if l == 0 { FEATURES } else { 2 * h }, true))
            .collect();
        let query = affine("attention.query", h, h, true);
        // A key bias only shifts every score of a query equally; softmax
        // cancels it, so the block would carry an identically zero gradient.
        let key = affine("attention.key", h, h, false);
        let value = affine("attention.value", h, h, true);
        let hidden = affine("decoder.hidden", h, 2 * h, true);
        let output = affine("decoder.output", 2 * TARGET_STEPS, h, true);
        Self {
            blocks,
            encoder,
            query,
            key,
            value,
            hidden,
            output,
            total: offset,
        }
    }
}

/// Parameters of the predictor network plus the config they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel<T: Real> {
    config: ModelConfig,
    pub(crate) params: Vec<T>,
}

impl<T: Real> PredictorModel<T> {
    /// Randomly initialized model: uniform weights with bound `sqrt(6/fan_in)`
    /// ahead of a ReLU and `1/sqrt(fan_in)` otherwise; biases uniform with
    /// bound `1/sqrt(fan_in)`. Draws come from the `Init` substream of
    /// `config.init_seed`, block by block in layout order.
    pub fn new(config: &ModelConfig) -> Result<Self, PredictorError> {
        let mut model = Self::zeros(config)?;
        let layout = Layout::new(config);
        let mut src = Substream::new(config.init_seed, 0, Purpose::Init);
        let relu_fed: Vec<usize> = layout
            .encoder
            .iter()
            .chain([&layout.hidden])
            .map(|a| a.w)
            .collect();
        let mut fan_in = 1;
        for block in &layout.blocks {
            let bound = if block.name.ends_with(".bias") {
                1.0 / libm::sqrt(fan_in as f64)
            } else if relu_fed.contains(&block.offset) {
                libm::sqrt(6.0 / block.cols as f64)
            } else {
                1.0 / libm::sqrt(block.cols as f64)
            };
            if block.name.ends_with(".weight") {
                fan_in = block.cols;
            }
            for p in &mut model.params[block.range()] {
                *p = T::lit(src.symmetric(bound));
            }
        }
        Ok(model)
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self, PredictorError> {
        config.validate()?;
        let total = Layout::new(config).total;
        Ok(Self {
            config: *config,
            params: vec![T::zero(); total],
        })
    }

    pub fn from_params(config: &ModelConfig, params: Vec<T>) -> Result<Self, PredictorError> {
        config.validate()?;
        let expected = Layout::new(config).total;
        if params.len() != expected {
            return Err(PredictorError::ParamCount {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            config: *config,
            params,
        })
    }

    /// Parameter count implied by a config.
    pub fn parameter_count(config: &ModelConfig) -> usize {
        Layout::new(config).total
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Shape manifest of the flat parameter array.
    pub fn blocks(&self) -> Vec<ParamBlock> {
        Layout::new(&self.config).blocks
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Mutable view of one named block, for tests and surgery.
    pub fn block_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let block = self.blocks().into_iter().find(|b| b.name == name)?;
        Some(&mut self.params[block.range()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_is_a_function_of_config() {
        let c = ModelConfig { hidden_dim: 4, ..ModelConfig::default() };
        // encoder 4*7+4 + 2*(4*8+4), attention 3*16+2*4, decoder 4*8+4 + 48*4+48
        let expected = 32 + 72 + 56 + 36 + 240;
        assert_eq!(PredictorModel::<f64>::parameter_count(&c), expected);
        let m = PredictorModel::<f64>::new(&c).unwrap();
        assert_eq!(m.params().len(), expected);
        let blocks = m.blocks();
        assert_eq!(blocks.last().unwrap().range().end, expected);
        for w in blocks.windows(2) {
            assert_eq!(w[0].range().end, w[1].offset);
        }
    }

    #[test]
    fn init_is_seeded() {
        let c = ModelConfig { hidden_dim: 8, init_seed: 3, ..ModelConfig::default() };
        let a = PredictorModel::<f64>::new(&c).unwrap();
        assert_eq!(a, PredictorModel::<f64>::new(&c).unwrap());
        let b = PredictorModel::<f64>::new(&ModelConfig { init_seed: 4, ..c }).unwrap();
        assert_ne!(a, b);
        assert!(a.params().iter().any(|&p| p != 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let c = ModelConfig { attention_heads: 2, ..ModelConfig::default() };
        assert!(PredictorModel::<f32>::new(&c).is_err());
        let c = ModelConfig::default();
        assert_eq!(
            PredictorModel::<f32>::from_params(&c, vec![0.0; 3]),
            Err(PredictorError::ParamCount { expected: PredictorModel::<f32>::parameter_count(&c), got: 3 })
        );
    }
}
