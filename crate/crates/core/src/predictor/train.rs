use alloc::vec;
use alloc::vec::Vec;

use super::network::flat_target;
use super::{ModelConfig, PredictorError, PredictorModel, Real, SceneInput};
use crate::rng::{shuffle, Purpose, Substream};
use crate::split::{split_train_val, MIN_POOL};
use crate::vectorizer::VectorizedScene;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;
/// Training share of the deterministic split.
pub const TRAIN_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean per-sample loss seen during the epoch.
    pub train: f64,
    /// Mean validation loss after the epoch.
    pub val: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Real> {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: PredictorModel<T>,
    pub curve: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub train_size: usize,
    pub val_size: usize,
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Real> Adam<T> {
    fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        self.step += 1;
        let (b1, b2) = (T::lit(BETA1), T::lit(BETA2));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let lr = T::lit(lr);
        let eps = T::lit(EPSILON);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

struct Sample<T> {
    input: SceneInput<T>,
    target: Vec<T>,
}

fn mean_loss<T: Real>(model: &PredictorModel<T>, samples: &[&Sample<T>]) -> Result<f64, PredictorError> {
    let mut sum = 0.0;
    for s in samples {
        sum += model.sample_loss(&s.input, &s.target)?.to_f64().unwrap();
    }
    Ok(sum / samples.len() as f64)
}

/// Trains a fresh model on `dataset`.
///
/// Datasets of at least ten scenes are split 90/10 by a shuffle keyed on
/// `init_seed`; smaller ones train and validate on everything. Each epoch
/// reshuffles the training part, runs Adam on mini-batch mean gradients and
/// keeps the parameters with the best validation loss. Gradients are summed
/// in a fixed order, so double-precision runs are bit-reproducible.
pub fn train<T: Real>(dataset: &[VectorizedScene], config: &ModelConfig) -> Result<TrainOutcome<T>, PredictorError> {
    if dataset.is_empty() {
        return Err(PredictorError::EmptyDataset);
    }
    let mut model = PredictorModel::<T>::new(config)?;
    let samples = dataset
        .iter()
        .map(|s| {
            Ok(Sample {
                input: SceneInput::from_scene(s)?,
                target: flat_target(s),
            })
        })
        .collect::<Result<Vec<_>, PredictorError>>()?;

    let indices: Vec<usize> = (0..samples.len()).collect();
    let (train_idx, val_idx) = if samples.len() >= MIN_POOL {
        split_train_val(indices, TRAIN_RATIO, config.init_seed).expect("pool size checked")
    } else {
        (indices.clone(), indices)
    };
    let train_set: Vec<&Sample<T>> = train_idx.iter().map(|&i| &samples[i]).collect();
    let val_set: Vec<&Sample<T>> = val_idx.iter().map(|&i| &samples[i]).collect();

    let n = model.params.len();
    let mut adam = Adam::new(n);
    let mut grad = vec![T::zero(); n];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (f64::INFINITY, model.clone(), 0);
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        shuffle(&mut order, &mut Substream::new(config.init_seed, epoch as u64, Purpose::Shuffle));
        let mut epoch_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let weight = T::one() / T::lit(batch.len() as f64);
            for &i in batch {
                let s = train_set[i];
                let l = model.loss_and_gradient(&s.input, &s.target, weight, &mut grad)?;
                epoch_sum += l.to_f64().unwrap();
            }
            adam.update(&mut model.params, &grad, config.learning_rate);
        }
        let train_loss = epoch_sum / train_set.len() as f64;
        let val_loss = mean_loss(&model, &val_set)?;
        curve.push(EpochLoss {
            epoch,
            train: train_loss,
            val: val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
        }
    }
    Ok(TrainOutcome {
        model: best.1,
        curve,
        best_epoch: best.2,
        train_size: train_set.len(),
        val_size: val_set.len(),
    })
}
