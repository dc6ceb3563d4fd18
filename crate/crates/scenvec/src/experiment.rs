//! Generation, training, evaluation and baseline runs shared by the CLI and
//! the test suites.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use scenvec_core::metamodel::{fit_tree, MetamodelError, TabularDataset, TreeEnsemble, TreeParams};
use scenvec_core::metrics::{self, EvaluationMetrics, MetricsError};
use scenvec_core::predictor::{train, EpochLoss, ModelConfig, PredictorError, PredictorModel, Real};
use scenvec_core::sampler::{sample_scene, SamplerConfig, SamplerError};
use scenvec_core::simulator::SimParams;
use scenvec_core::vectorizer::{reconstruct_trajectory, vectorize, VectorizeError, VectorizedScene};
use scenvec_core::{SceneRecord, ScenarioKind, Trajectory};
use thiserror::Error;

use crate::dataset::{assemble_mix, DatasetError, MixSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Metamodel(#[from] MetamodelError),
}

/// Simulates `count` scenes of one kind. Scenes are computed in parallel and
/// returned in index order.
pub fn generate_kind(kind: ScenarioKind, seed: u64, count: u64, sim: &SimParams) -> Result<Vec<SceneRecord>, SamplerError> {
    let config = SamplerConfig::new(kind, seed, count)?;
    (0..count).into_par_iter().map(|i| sample_scene(&config, i, sim)).collect()
}

/// Ego trajectory implied by the model's displacement predictions.
pub fn predict_trajectory<T: Real>(model: &PredictorModel<T>, record: &SceneRecord) -> Result<Trajectory, ExperimentError> {
    let scene = vectorize(record);
    let predicted: Vec<[f64; 2]> = model
        .forward(&scene)?
        .iter()
        .map(|d| [d[0].to_f64().unwrap(), d[1].to_f64().unwrap()])
        .collect();
    Ok(reconstruct_trajectory(&scene, &predicted)?)
}

/// Prediction quality on one kind's test pool.
#[derive(Debug, Clone, PartialEq)]
pub struct KindEvaluation {
    pub kind: ScenarioKind,
    pub records: usize,
    pub ade: f64,
    /// MAE of metrics derived from predicted trajectories, keyed by metric
    /// name; only the metrics relevant to the kind.
    pub mae: BTreeMap<&'static str, f64>,
}

/// ADE and derived-metric MAE of `model` on `test` (one kind). The Co of each
/// record is taken from ground truth when recomputing metrics.
pub fn evaluate_predictor<T: Real>(model: &PredictorModel<T>, kind: ScenarioKind, test: &[SceneRecord]) -> Result<KindEvaluation, ExperimentError> {
    let per_record: Vec<(f64, EvaluationMetrics)> = test
        .par_iter()
        .map(|r| {
            let predicted = predict_trajectory(model, r)?;
            let ade = metrics::ade(&predicted, &r.ego)?;
            let m = metrics::evaluate(&predicted, r.co.as_ref())?;
            Ok((ade, m))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let n = test.len() as f64;
    let ade = per_record.iter().map(|p| p.0).sum::<f64>() / n;
    let mut mae = BTreeMap::new();
    for name in EvaluationMetrics::names(kind.has_co(), kind.has_curvature()) {
        let predicted: Vec<f64> = per_record.iter().map(|p| p.1.get(name).unwrap()).collect();
        let truth: Vec<f64> = test.iter().map(|r| r.metrics.get(name).unwrap()).collect();
        mae.insert(name, metrics::mae(&predicted, &truth)?);
    }
    Ok(KindEvaluation {
        kind,
        records: test.len(),
        ade,
        mae,
    })
}

/// Result of training on one mix and evaluating on all test pools.
#[derive(Debug, Clone)]
pub struct MixRun<T: Real> {
    pub spec: MixSpec,
    pub model: PredictorModel<T>,
    pub curve: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub train_size: usize,
    pub val_size: usize,
    /// Indexed by [`ScenarioKind::ordinal`].
    pub evaluations: [KindEvaluation; 3],
    pub wall_time_s: f64,
}

/// Assembles the mix, trains with a 90/10 split and evaluates on the test
/// pool of every kind.
pub fn run_mix<T: Real>(
    spec: &MixSpec,
    sources: [&[SceneRecord]; 3],
    test_size: usize,
    config: &ModelConfig,
) -> Result<MixRun<T>, ExperimentError> {
    let start = Instant::now();
    let pools = assemble_mix(spec, sources, test_size)?;
    let scenes: Vec<VectorizedScene> = pools.train.par_iter().map(vectorize).collect();
    let outcome = train::<T>(&scenes, config)?;
    let evaluations = [0, 1, 2].map(|i| evaluate_predictor(&outcome.model, ScenarioKind::ALL[i], &pools.test[i]));
    let [a, b, c] = evaluations;
    Ok(MixRun {
        spec: *spec,
        model: outcome.model,
        curve: outcome.curve,
        best_epoch: outcome.best_epoch,
        train_size: outcome.train_size,
        val_size: outcome.val_size,
        evaluations: [a?, b?, c?],
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Grows the trees in parallel; identical to `metamodel::fit` for the same
/// parameters.
pub fn fit_ensemble(data: &TabularDataset, params: &TreeParams) -> Result<TreeEnsemble, MetamodelError> {
    let trees = (0..params.num_trees)
        .into_par_iter()
        .map(|t| fit_tree(data, params, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TreeEnsemble::from_trees(trees, *params, data.input_names().len(), data.output_names().len()))
}

/// Baseline errors for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBaseline {
    pub metric: String,
    pub mae_tree: f64,
    /// MAE of always predicting the training mean.
    pub mae_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindBaseline {
    pub kind: ScenarioKind,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: Vec<MetricBaseline>,
    pub wall_time_s: f64,
}

/// Fits the tree ensemble on `train` and scores it on `test` (one kind).
pub fn run_baseline(kind: ScenarioKind, train: &[SceneRecord], test: &[SceneRecord], params: &TreeParams) -> Result<KindBaseline, ExperimentError> {
    let start = Instant::now();
    let train_data = TabularDataset::from_records(train)?;
    let test_data = TabularDataset::from_records(test)?;
    let model = fit_ensemble(&train_data, params)?;
    let predictions: Vec<Vec<f64>> = test_data
        .inputs()
        .par_iter()
        .map(|x| model.predict(x))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (o, name) in train_data.output_names().iter().enumerate() {
        let truth = test_data.column(o);
        let predicted: Vec<f64> = predictions.iter().map(|p| p[o]).collect();
        let column = train_data.column(o);
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        out.push(MetricBaseline {
            metric: name.clone(),
            mae_tree: metrics::mae(&predicted, &truth)?,
            mae_mean: metrics::mae(&vec![mean; truth.len()], &truth)?,
        });
    }
    Ok(KindBaseline {
        kind,
        train_size: train.len(),
        test_size: test.len(),
        metrics: out,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Training records of the baseline: the same selection a single-kind mix of
/// `train_size` records with `seed` would draw.
pub fn baseline_pools(
    kind: ScenarioKind,
    sources: [&[SceneRecord]; 3],
    train_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<(Vec<SceneRecord>, Vec<SceneRecord>), DatasetError> {
    let mut spec = MixSpec::new(0, 0, 0);
    match kind {
        ScenarioKind::Acc => spec.n_acc = train_size,
        ScenarioKind::Lk => spec.n_lk = train_size,
        ScenarioKind::AccLk => spec.n_acc_lk = train_size,
    }
    spec.seeds = [seed; 3];
    let mut pools = assemble_mix(&spec, sources, test_size)?;
    Ok((pools.train, std::mem::take(&mut pools.test[kind.ordinal()])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenvec_core::metamodel::fit;

    #[test]
    fn parallel_generation_matches_sequential() {
        let sim = SimParams::default();
        let par = generate_kind(ScenarioKind::AccLk, 8, 30, &sim).unwrap();
        let cfg = SamplerConfig::new(ScenarioKind::AccLk, 8, 30).unwrap();
        let seq: Vec<_> = (0..30).map(|i| sample_scene(&cfg, i, &sim).unwrap()).collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn parallel_ensemble_matches_sequential_fit() {
        let records = generate_kind(ScenarioKind::Acc, 2, 60, &SimParams::default()).unwrap();
        let data = TabularDataset::from_records(&records).unwrap();
        let params = TreeParams { num_trees: 6, ..TreeParams::default() };
        assert_eq!(fit_ensemble(&data, &params).unwrap(), fit(&data, &params).unwrap());
    }

    #[test]
    fn small_mix_runs_end_to_end() {
        let sim = SimParams::default();
        let sources: Vec<Vec<SceneRecord>> = ScenarioKind::ALL
            .iter()
            .map(|&k| generate_kind(k, 5, 40, &sim).unwrap())
            .collect();
        let src = [&sources[0][..], &sources[1][..], &sources[2][..]];
        let config = ModelConfig { hidden_dim: 8, epochs: 2, batch_size: 8, ..ModelConfig::default() };
        let run = run_mix::<f64>(&MixSpec::new(10, 10, 10), src, 10, &config).unwrap();
        assert_eq!((run.train_size, run.val_size), (27, 3));
        for (e, kind) in run.evaluations.iter().zip(ScenarioKind::ALL) {
            assert_eq!(e.kind, kind);
            assert_eq!(e.records, 10);
            assert!(e.ade.is_finite());
            let names: Vec<&str> = e.mae.keys().copied().collect();
            let mut expected = EvaluationMetrics::names(kind.has_co(), kind.has_curvature());
            expected.sort();
            assert_eq!(names, expected);
        }
    }

    #[test]
    fn baseline_reports_relevant_metrics() {
        let sim = SimParams::default();
        let sources: Vec<Vec<SceneRecord>> = ScenarioKind::ALL
            .iter()
            .map(|&k| generate_kind(k, 6, 50, &sim).unwrap())
            .collect();
        let src = [&sources[0][..], &sources[1][..], &sources[2][..]];
        let params = TreeParams { num_trees: 5, ..TreeParams::default() };
        let expected = [vec!["a_min", "d_min"], vec!["p_lat_max"], vec!["a_min", "d_min", "p_lat_max"]];
        for kind in ScenarioKind::ALL {
            let (train, test) = baseline_pools(kind, src, 30, 20, 0).unwrap();
            let b = run_baseline(kind, &train, &test, &params).unwrap();
            let names: Vec<&str> = b.metrics.iter().map(|m| m.metric.as_str()).collect();
            assert_eq!(names, expected[kind.ordinal()]);
            assert_eq!((b.train_size, b.test_size), (30, 20));
        }
    }
}
