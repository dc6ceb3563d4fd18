//! Trajectory evaluation metrics and dataset-level error statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;

use thiserror::Error;

use crate::scenario::Trajectory;
use crate::DT;

/// Index of the first predicted state; states 0 and 1 come from the Ego's
/// input vector and are excluded from displacement errors by default.
pub const FIRST_PREDICTED_STATE: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trajectory lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trajectory timestamps differ at state {0}")]
    TimestampMismatch(usize),
    #[error("need at least {needed} states, got {got}")]
    TooFewStates { needed: usize, got: usize },
    #[error("empty value list")]
    Empty,
}

/// Scenario evaluation metrics of one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationMetrics {
    /// Ego's minimum acceleration in m/s² (strongest deceleration).
    pub a_min: f64,
    /// Ego's maximum absolute world-frame lateral position in m.
    pub p_lat_max: f64,
    /// Minimum Ego–Co center distance in m; `None` without a Co.
    pub d_min: Option<f64>,
}

impl EvaluationMetrics {
    /// Metric names relevant to a scene kind, in report order.
    pub fn names(has_co: bool, has_curvature: bool) -> alloc::vec::Vec<&'static str> {
        let mut out = alloc::vec::Vec::new();
        if has_co {
            out.extend_from_slice(&["a_min", "d_min"]);
        }
        if has_curvature {
            out.push("p_lat_max");
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "a_min" => Some(self.a_min),
            "p_lat_max" => Some(self.p_lat_max),
            "d_min" => self.d_min,
            _ => None,
        }
    }

    /// Unit suffix of a metric.
    pub fn unit(name: &str) -> &'static str {
        match name {
            "a_min" => "m/s²",
            _ => "m",
        }
    }
}

/// Computes all metrics from the Ego trajectory and the optional Co.
pub fn evaluate(ego: &Trajectory, co: Option<&Trajectory>) -> Result<EvaluationMetrics, MetricsError> {
    Ok(EvaluationMetrics {
        a_min: min_acceleration(ego)?,
        p_lat_max: max_lateral_position(ego)?,
        d_min: co.map(|co| min_distance(ego, co)).transpose()?,
    })
}

/// Euclidean length as `sqrt(dx² + dy²)`. Square root is correctly rounded
/// on every IEEE platform, so any reimplementation reproduces it bit for bit.
pub fn distance(dx: f64, dy: f64) -> f64 {
    libm::sqrt(dx * dx + dy * dy)
}

/// Average displacement error over the predicted states
/// (indices `FIRST_PREDICTED_STATE..`).
pub fn ade(predicted: &Trajectory, truth: &Trajectory) -> Result<f64, MetricsError> {
    ade_from(predicted, truth, FIRST_PREDICTED_STATE)
}

/// Average displacement error over states `first..`.
pub fn ade_from(predicted: &Trajectory, truth: &Trajectory, first: usize) -> Result<f64, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), truth.len()));
    }
    if truth.len() <= first {
        return Err(MetricsError::TooFewStates {
            needed: first + 1,
            got: truth.len(),
        });
    }
    let sum: f64 = predicted.states[first..]
        .iter()
        .zip(&truth.states[first..])
        .map(|(p, t)| distance(p.x - t.x, p.y - t.y))
        .sum();
    Ok(sum / (truth.len() - first) as f64)
}

/// Minimum difference quotient `(speed[k+1] - speed[k]) / DT`.
pub fn min_acceleration(traj: &Trajectory) -> Result<f64, MetricsError> {
    if traj.len() < 2 {
        return Err(MetricsError::TooFewStates {
            needed: 2,
            got: traj.len(),
        });
    }
    Ok(traj
        .states
        .windows(2)
        .map(|w| (w[1].speed - w[0].speed) / DT)
        .fold(f64::INFINITY, f64::min))
}

/// Maximum of `|y|` over all states.
pub fn max_lateral_position(traj: &Trajectory) -> Result<f64, MetricsError> {
    if traj.is_empty() {
        return Err(MetricsError::TooFewStates { needed: 1, got: 0 });
    }
    Ok(traj.states.iter().map(|s| s.y.abs()).fold(0.0, f64::max))
}

/// Minimum center distance over the shared timestamps.
pub fn min_distance(ego: &Trajectory, co: &Trajectory) -> Result<f64, MetricsError> {
    if ego.len() != co.len() {
        return Err(MetricsError::LengthMismatch(ego.len(), co.len()));
    }
    if ego.is_empty() {
        return Err(MetricsError::TooFewStates { needed: 1, got: 0 });
    }
    let mut best = f64::INFINITY;
    for (k, (a, b)) in ego.states.iter().zip(&co.states).enumerate() {
        if a.t != b.t {
            return Err(MetricsError::TimestampMismatch(k));
        }
        best = best.min(distance(a.x - b.x, a.y - b.y));
    }
    Ok(best)
}

/// Mean absolute error.
pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / truth.len() as f64)
}

/// ADE plus per-metric MAE entries (keys are metric names, units via
/// [`EvaluationMetrics::unit`]).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub ade: f64,
    pub mae: BTreeMap<String, f64>,
}
