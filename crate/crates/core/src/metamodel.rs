//! Extremely randomized trees regressing evaluation metrics on the raw
//! scenario inputs.
//!
//! Every tree is grown on the full training set. At each node the considered
//! features each get one threshold drawn uniformly over the values that keep
//! at least `min_samples_leaf` rows on both sides; the candidate with the
//! lowest weighted target variance wins. Outputs are scored jointly, each
//! output's variance divided by its variance over the whole training set so
//! metrics with larger units do not dominate.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::metrics::EvaluationMetrics;
use crate::rng::{Purpose, Substream, UnitSource};
use crate::scenario::{ConcreteScenario, SceneRecord, ScenarioKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetamodelError {
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row {row}: {what} has {got} columns, manifest has {expected}")]
    RaggedRow {
        row: usize,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("row {row}: non-finite value")]
    NonFinite { row: usize },
    #[error("input and output row counts differ: {0} vs {1}")]
    RowCountMismatch(usize, usize),
    #[error("records mix scenario kinds {0} and {1}")]
    MixedKinds(ScenarioKind, ScenarioKind),
    #[error("record {row} lacks metric {metric}")]
    MissingMetric { row: usize, metric: &'static str },
    #[error("invalid tree parameters: {0}")]
    InvalidParams(&'static str),
}

/// Inputs `X` (rows × inputs) and targets `Y` (rows × outputs) with column
/// manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    input_names: Vec<String>,
    output_names: Vec<String>,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl TabularDataset {
    pub fn new(
        input_names: Vec<String>,
        output_names: Vec<String>,
        inputs: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
    ) -> Result<Self, MetamodelError> {
        if inputs.len() != outputs.len() {
            return Err(MetamodelError::RowCountMismatch(inputs.len(), outputs.len()));
        }
        for (row, (x, y)) in inputs.iter().zip(&outputs).enumerate() {
            for (what, values, expected) in [("inputs", x, input_names.len()), ("outputs", y, output_names.len())] {
                if values.len() != expected {
                    return Err(MetamodelError::RaggedRow {
                        row,
                        what,
                        expected,
                        got: values.len(),
                    });
                }
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(MetamodelError::NonFinite { row });
            }
        }
        Ok(Self {
            input_names,
            output_names,
            inputs,
            outputs,
        })
    }

    /// Active scenario inputs against the kind's relevant metrics, for
    /// records of a single kind.
    pub fn from_records(records: &[SceneRecord]) -> Result<Self, MetamodelError> {
        let Some(first) = records.first() else {
            return Err(MetamodelError::TooFewRows { needed: 1, got: 0 });
        };
        let kind = first.scenario.kind;
        let metrics = EvaluationMetrics::names(kind.has_co(), kind.has_curvature());
        let mut inputs = Vec::with_capacity(records.len());
        let mut outputs = Vec::with_capacity(records.len());
        for (row, r) in records.iter().enumerate() {
            if r.scenario.kind != kind {
                return Err(MetamodelError::MixedKinds(kind, r.scenario.kind));
            }
            inputs.push(r.scenario.active_inputs());
            let y = metrics
                .iter()
                .map(|&metric| r.metrics.get(metric).ok_or(MetamodelError::MissingMetric { row, metric }))
                .collect::<Result<Vec<_>, _>>()?;
            outputs.push(y);
        }
        Self::new(
            ConcreteScenario::input_names(kind).into_iter().map(String::from).collect(),
            metrics.into_iter().map(String::from).collect(),
            inputs,
            outputs,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    /// One target column.
    pub fn column(&self, output: usize) -> Vec<f64> {
        self.outputs.iter().map(|y| y[output]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub num_trees: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` considers all of them.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            num_trees: 100,
            min_samples_leaf: 2,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    fn validate(&self, n_inputs: usize) -> Result<(), MetamodelError> {
        if self.num_trees == 0 {
            return Err(MetamodelError::InvalidParams("num_trees must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(MetamodelError::InvalidParams("min_samples_leaf must be at least 1"));
        }
        if let Some(k) = self.features_per_split {
            if k == 0 || k > n_inputs {
                return Err(MetamodelError::InvalidParams("features_per_split must lie in 1..=inputs"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go to `left`. Children are node
    /// indices within the same tree.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: Vec<f64>, samples: usize },
}

/// Binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
                Node::Leaf { value, .. } => return value,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, samples } => Some((value.as_slice(), *samples)),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub params: TreeParams,
    n_inputs: usize,
    n_outputs: usize,
}

impl TreeEnsemble {
    pub fn from_trees(trees: Vec<Tree>, params: TreeParams, n_inputs: usize, n_outputs: usize) -> Self {
        Self {
            trees,
            params,
            n_inputs,
            n_outputs,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Mean over trees of the leaf values reached by `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, MetamodelError> {
        if x.len() != self.n_inputs {
            return Err(MetamodelError::DimensionMismatch {
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.n_outputs];
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf(x)) {
                *o += v;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }
}

/// Fits `params.num_trees` trees; tree `t` draws from the `Tree` substream
/// `(params.seed, t)`, so trees may also be grown independently with
/// [`fit_tree`] and assembled in index order.
pub fn fit(data: &TabularDataset, params: &TreeParams) -> Result<TreeEnsemble, MetamodelError> {
    check_fit(data, params)?;
    let trees = (0..params.num_trees)
        .map(|t| fit_tree(data, params, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TreeEnsemble::from_trees(trees, *params, data.input_names.len(), data.output_names.len()))
}

fn check_fit(data: &TabularDataset, params: &TreeParams) -> Result<(), MetamodelError> {
    params.validate(data.input_names.len())?;
    if data.len() < params.min_samples_leaf.max(1) {
        return Err(MetamodelError::TooFewRows {
            needed: params.min_samples_leaf.max(1),
            got: data.len(),
        });
    }
    Ok(())
}

/// Grows tree number `index` of the ensemble described by `params`.
pub fn fit_tree(data: &TabularDataset, params: &TreeParams, index: usize) -> Result<Tree, MetamodelError> {
    check_fit(data, params)?;
    let mut builder = Builder {
        data,
        params,
        scale: root_scale(data),
        src: Substream::new(params.seed, index as u64, Purpose::Tree),
        rows: (0..data.len()).collect(),
        nodes: Vec::new(),
        features: (0..data.input_names.len()).collect(),
    };
    builder.grow();
    Ok(Tree { nodes: builder.nodes })
}

/// Inverse of each output's variance over the whole dataset (0 when constant).
fn root_scale(data: &TabularDataset) -> Vec<f64> {
    let n = data.len() as f64;
    (0..data.output_names.len())
        .map(|o| {
            let mean = data.outputs.iter().map(|y| y[o]).sum::<f64>() / n;
            let var = data.outputs.iter().map(|y| (y[o] - mean) * (y[o] - mean)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / var
            } else {
                0.0
            }
        })
        .collect()
}

/// Thresholds in `(lo, hi]` leave at least `msl` values on each side of a
/// `x < threshold` split: `lo` is the msl-th smallest value, `hi` the msl-th
/// largest. `None` when no such threshold exists.
fn admissible_range(values: &mut [f64], msl: usize) -> Option<(f64, f64)> {
    let n = values.len();
    let lo = *values.select_nth_unstable_by(msl - 1, f64::total_cmp).1;
    let hi = *values.select_nth_unstable_by(n - msl, f64::total_cmp).1;
    (lo < hi).then_some((lo, hi))
}

struct Builder<'a> {
    data: &'a TabularDataset,
    params: &'a TreeParams,
    scale: Vec<f64>,
    src: Substream,
    /// Row indices; every node owns a contiguous range.
    rows: Vec<usize>,
    nodes: Vec<Node>,
    features: Vec<usize>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn grow(&mut self) {
        self.nodes.push(Node::Leaf {
            value: Vec::new(),
            samples: 0,
        });
        let mut stack = vec![(0usize, 0usize, self.rows.len())];
        while let Some((node, start, end)) = stack.pop() {
            match self.best_split(start, end) {
                Some(c) => {
                    let mid = self.partition(start, end, c.feature, c.threshold);
                    let left = self.nodes.len();
                    self.nodes.push(Node::Leaf {
                        value: Vec::new(),
                        samples: 0,
                    });
                    self.nodes.push(Node::Leaf {
                        value: Vec::new(),
                        samples: 0,
                    });
                    self.nodes[node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, mid, end));
                    stack.push((left, start, mid));
                }
                None => self.nodes[node] = self.leaf(start, end),
            }
        }
    }

    fn leaf(&self, start: usize, end: usize) -> Node {
        let n = end - start;
        let mut value = vec![0.0; self.data.output_names.len()];
        for &r in &self.rows[start..end] {
            for (v, y) in value.iter_mut().zip(&self.data.outputs[r]) {
                *v += y;
            }
        }
        value.iter_mut().for_each(|v| *v /= n as f64);
        Node::Leaf { value, samples: n }
    }

    fn constant_targets(&self, start: usize, end: usize) -> bool {
        let first = &self.data.outputs[self.rows[start]];
        self.rows[start + 1..end].iter().all(|&r| self.data.outputs[r] == *first)
    }

    fn best_split(&mut self, start: usize, end: usize) -> Option<Candidate> {
        let msl = self.params.min_samples_leaf;
        if end - start < 2 * msl || self.constant_targets(start, end) {
            return None;
        }
        let k = self.params.features_per_split.unwrap_or(self.features.len());
        // Partial Fisher-Yates: the first k entries become the considered set.
        if k < self.features.len() {
            for i in 0..k {
                let j = i + self.src.below(self.features.len() - i);
                self.features.swap(i, j);
            }
        }
        let mut best: Option<Candidate> = None;
        let mut values = Vec::with_capacity(end - start);
        for fi in 0..k {
            let feature = self.features[fi];
            values.clear();
            values.extend(self.rows[start..end].iter().map(|&r| self.data.inputs[r][feature]));
            let Some((lo, hi)) = admissible_range(&mut values, msl) else {
                continue;
            };
            let mut threshold = self.src.uniform(lo, hi);
            if threshold <= lo {
                threshold = lo + 0.5 * (hi - lo);
            }
            if let Some(score) = self.score(start, end, feature, threshold) {
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(Candidate {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    /// Summed scaled within-child variance, times the node size; `None` if a
    /// child would be smaller than the leaf minimum.
    fn score(&self, start: usize, end: usize, feature: usize, threshold: f64) -> Option<f64> {
        let outputs = self.scale.len();
        let mut sums = [vec![0.0; outputs], vec![0.0; outputs]];
        let mut squares = [vec![0.0; outputs], vec![0.0; outputs]];
        let mut counts = [0usize; 2];
        for &r in &self.rows[start..end] {
            let side = usize::from(self.data.inputs[r][feature] >= threshold);
            counts[side] += 1;
            for (o, &y) in self.data.outputs[r].iter().enumerate() {
                sums[side][o] += y;
                squares[side][o] += y * y;
            }
        }
        if counts.iter().any(|&c| c < self.params.min_samples_leaf) {
            return None;
        }
        let mut score = 0.0;
        for side in 0..2 {
            let n = counts[side] as f64;
            for o in 0..outputs {
                let sse = (squares[side][o] - sums[side][o] * sums[side][o] / n).max(0.0);
                score += self.scale[o] * sse;
            }
        }
        Some(score)
    }

    fn partition(&mut self, start: usize, end: usize, feature: usize, threshold: f64) -> usize {
        let mut mid = start;
        for i in start..end {
            if self.data.inputs[self.rows[i]][feature] < threshold {
                self.rows.swap(i, mid);
                mid += 1;
            }
        }
        mid
    }
}
