//! Report rows (CSV) and consolidated Markdown tables.
//!
//! Training runs write one [`AdeRow`]: sample counts, average displacement
//! errors and the MAE of metrics derived from predicted trajectories.
//! Baseline runs write [`MaeRow`]s comparing the tree ensemble with the
//! predictor. Units ride along in column headers (`[m]`, `[m/s²]`) or, where
//! one column mixes metrics, in a `unit` column.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scenvec_core::ScenarioKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{KindBaseline, MixRun};
use scenvec_core::predictor::Real;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}: not a report row file")]
    UnknownLayout(PathBuf),
    #[error("no report rows given")]
    NoInputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdeRow {
    pub row: String,
    #[serde(rename = "N_ACC")]
    pub n_acc: usize,
    #[serde(rename = "N_LK")]
    pub n_lk: usize,
    #[serde(rename = "N_ACC&LK")]
    pub n_acc_lk: usize,
    #[serde(rename = "ADE_ACC [m]")]
    pub ade_acc: f64,
    #[serde(rename = "ADE_LK [m]")]
    pub ade_lk: f64,
    #[serde(rename = "ADE_ACC&LK [m]")]
    pub ade_acc_lk: f64,
    #[serde(rename = "MAE_ACC_a_min [m/s²]")]
    pub mae_acc_a_min: f64,
    #[serde(rename = "MAE_ACC_d_min [m]")]
    pub mae_acc_d_min: f64,
    #[serde(rename = "MAE_LK_p_lat_max [m]")]
    pub mae_lk_p_lat_max: f64,
    #[serde(rename = "MAE_ACC&LK_a_min [m/s²]")]
    pub mae_acc_lk_a_min: f64,
    #[serde(rename = "MAE_ACC&LK_d_min [m]")]
    pub mae_acc_lk_d_min: f64,
    #[serde(rename = "MAE_ACC&LK_p_lat_max [m]")]
    pub mae_acc_lk_p_lat_max: f64,
    pub init_seed: u64,
    pub mix_seeds: String,
    pub precision: String,
    pub epochs: usize,
    pub best_epoch: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    #[serde(rename = "wall_time [s]")]
    pub wall_time_s: f64,
}

impl AdeRow {
    pub fn from_run<T: Real>(label: &str, run: &MixRun<T>) -> Self {
        let [acc, lk, acc_lk] = &run.evaluations;
        let seeds = run.spec.seeds.map(|s| s.to_string()).join(";");
        let config = run.model.config();
        Self {
            row: label.into(),
            n_acc: run.spec.n_acc,
            n_lk: run.spec.n_lk,
            n_acc_lk: run.spec.n_acc_lk,
            ade_acc: acc.ade,
            ade_lk: lk.ade,
            ade_acc_lk: acc_lk.ade,
            mae_acc_a_min: acc.mae["a_min"],
            mae_acc_d_min: acc.mae["d_min"],
            mae_lk_p_lat_max: lk.mae["p_lat_max"],
            mae_acc_lk_a_min: acc_lk.mae["a_min"],
            mae_acc_lk_d_min: acc_lk.mae["d_min"],
            mae_acc_lk_p_lat_max: acc_lk.mae["p_lat_max"],
            init_seed: config.init_seed,
            mix_seeds: seeds,
            precision: format!("{:?}", T::PRECISION).to_lowercase(),
            epochs: config.epochs,
            best_epoch: run.best_epoch,
            train_size: run.train_size,
            val_size: run.val_size,
            test_size: acc.records,
            wall_time_s: run.wall_time_s,
        }
    }

    /// Predictor MAE of one metric on one kind's test pool.
    pub fn mae(&self, kind: ScenarioKind, metric: &str) -> Option<f64> {
        match (kind, metric) {
            (ScenarioKind::Acc, "a_min") => Some(self.mae_acc_a_min),
            (ScenarioKind::Acc, "d_min") => Some(self.mae_acc_d_min),
            (ScenarioKind::Lk, "p_lat_max") => Some(self.mae_lk_p_lat_max),
            (ScenarioKind::AccLk, "a_min") => Some(self.mae_acc_lk_a_min),
            (ScenarioKind::AccLk, "d_min") => Some(self.mae_acc_lk_d_min),
            (ScenarioKind::AccLk, "p_lat_max") => Some(self.mae_acc_lk_p_lat_max),
            _ => None,
        }
    }

    /// The single kind this row was trained on, if any.
    pub fn single_kind(&self) -> Option<ScenarioKind> {
        match (self.n_acc > 0, self.n_lk > 0, self.n_acc_lk > 0) {
            (true, false, false) => Some(ScenarioKind::Acc),
            (false, true, false) => Some(ScenarioKind::Lk),
            (false, false, true) => Some(ScenarioKind::AccLk),
            _ => None,
        }
    }

    /// Values that must reproduce exactly across identical runs.
    pub fn deterministic_part(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub scenario: String,
    pub metric: String,
    pub unit: String,
    #[serde(rename = "MAE_ET")]
    pub mae_et: f64,
    #[serde(rename = "MAE_predictor")]
    pub mae_predictor: Option<f64>,
    #[serde(rename = "MAE_mean")]
    pub mae_mean: f64,
    pub tree_seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(rename = "wall_time [s]")]
    pub wall_time_s: f64,
}

impl MaeRow {
    /// One row per metric; `predictor` looks up the predictor MAE.
    pub fn from_baseline(b: &KindBaseline, tree_seed: u64, predictor: impl Fn(&str) -> Option<f64>) -> Vec<Self> {
        b.metrics
            .iter()
            .map(|m| MaeRow {
                scenario: b.kind.label().into(),
                metric: m.metric.clone(),
                unit: scenvec_core::EvaluationMetrics::unit(&m.metric).into(),
                mae_et: m.mae_tree,
                mae_predictor: predictor(&m.metric),
                mae_mean: m.mae_mean,
                tree_seed,
                train_size: b.train_size,
                test_size: b.test_size,
                wall_time_s: b.wall_time_s,
            })
            .collect()
    }
}

pub fn write_rows<R: Serialize>(rows: &[R], path: &Path) -> Result<(), ReportError> {
    let wrap = |source| ReportError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))
}

pub fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>, ReportError> {
    let wrap = |source| ReportError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().collect::<Result<_, _>>().map_err(wrap)
}

/// Rows gathered from any number of row files.
#[derive(Debug, Default)]
pub struct Collected {
    pub ade: Vec<AdeRow>,
    pub mae: Vec<MaeRow>,
}

/// Reads row files, telling the two layouts apart by their first column.
pub fn collect(paths: &[PathBuf]) -> Result<Collected, ReportError> {
    if paths.is_empty() {
        return Err(ReportError::NoInputs);
    }
    let mut out = Collected::default();
    for path in paths {
        let wrap = |source| ReportError::Csv { path: path.clone(), source };
        let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
        let first = reader.headers().map_err(wrap)?.get(0).unwrap_or_default().to_string();
        match first.as_str() {
            "row" => out.ade.extend(read_rows::<AdeRow>(path)?),
            "scenario" => out.mae.extend(read_rows::<MaeRow>(path)?),
            _ => return Err(ReportError::UnknownLayout(path.clone())),
        }
    }
    Ok(out)
}

fn fixed(v: f64) -> String {
    format!("{v:.2}")
}

/// ADE table with one line per row; repeated row labels are kept and
/// numbered.
pub fn ade_table(rows: &[AdeRow]) -> String {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in rows {
        *counts.entry(r.row.as_str()).or_default() += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut s = String::new();
    s.push_str("| Row | N_ACC | N_LK | N_ACC&LK | ADE_ACC [m] | ADE_LK [m] | ADE_ACC&LK [m] | init seed | mix seeds | train/val/test | best epoch | wall time [s] |\n");
    s.push_str("|---|--:|--:|--:|--:|--:|--:|--:|--:|--:|--:|--:|\n");
    for r in rows {
        let label = if counts[r.row.as_str()] > 1 {
            let n = seen.entry(r.row.as_str()).or_default();
            *n += 1;
            format!("{} (run {} of {})", r.row, n, counts[r.row.as_str()])
        } else {
            r.row.clone()
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {}/{}/{} | {}/{} | {:.1} |",
            label,
            r.n_acc,
            r.n_lk,
            r.n_acc_lk,
            fixed(r.ade_acc),
            fixed(r.ade_lk),
            fixed(r.ade_acc_lk),
            r.init_seed,
            r.mix_seeds,
            r.train_size,
            r.val_size,
            r.test_size,
            r.best_epoch,
            r.epochs,
            r.wall_time_s
        );
    }
    s
}

fn with_unit(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{} {unit}", fixed(v)))
}

/// Metric MAE table: tree ensemble and predictor side by side, plus the
/// constant-mean reference.
pub fn mae_table(rows: &[MaeRow]) -> String {
    let mut s = String::new();
    s.push_str("| Scenario | Evaluation Metric | MAE ET | MAE predictor | MAE mean | train/test | tree seed |\n");
    s.push_str("|---|---|--:|--:|--:|--:|--:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {}/{} | {} |",
            r.scenario,
            r.metric,
            with_unit(Some(r.mae_et), &r.unit),
            with_unit(r.mae_predictor, &r.unit),
            with_unit(Some(r.mae_mean), &r.unit),
            r.train_size,
            r.test_size,
            r.tree_seed
        );
    }
    s
}

/// Full Markdown report of the collected rows.
pub fn markdown(collected: &Collected) -> String {
    let mut s = String::new();
    if !collected.ade.is_empty() {
        s.push_str("## Average displacement errors of predicted Ego trajectories\n\n");
        s.push_str(&ade_table(&collected.ade));
        s.push('\n');
    }
    if !collected.mae.is_empty() {
        s.push_str("## Mean absolute errors of predicted evaluation metrics\n\n");
        s.push_str(&mae_table(&collected.mae));
        s.push('\n');
    }
    s
}
