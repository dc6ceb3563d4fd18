//! Shared domain types and their invariant checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::metrics::{self, EvaluationMetrics};
use crate::{DT, LANE_POINTS, TRAJECTORY_LEN};

/// Nominal lane width in m before noise.
pub const LANE_WIDTH: f64 = 3.5;
/// Bound of the uniform lane-width noise in m.
pub const LANE_WIDTH_NOISE: f64 = 0.3;
/// Bound of the uniform per-point centerline offset in m.
pub const CENTER_NOISE: f64 = 0.5;
/// First longitudinal lane sample in m.
pub const LANE_X_START: f64 = -55.0;
/// Longitudinal extent covered by the lane samples in m.
pub const LANE_X_SPAN: f64 = 110.0;

/// The three functional scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    /// Car following on a straight road.
    Acc,
    /// Lane keeping on a curved road, no Co.
    Lk,
    /// Car following on a curved road.
    AccLk,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Acc, ScenarioKind::Lk, ScenarioKind::AccLk];

    pub fn has_co(self) -> bool {
        !matches!(self, ScenarioKind::Lk)
    }

    pub fn has_curvature(self) -> bool {
        !matches!(self, ScenarioKind::Acc)
    }

    /// Wire name used in files and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Acc => "ACC",
            ScenarioKind::Lk => "LK",
            ScenarioKind::AccLk => "ACC_AND_LK",
        }
    }

    /// Label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Acc => "ACC",
            ScenarioKind::Lk => "LK",
            ScenarioKind::AccLk => "ACC&LK",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ACC" => Some(ScenarioKind::Acc),
            "LK" => Some(ScenarioKind::Lk),
            "ACC_AND_LK" | "ACC&LK" => Some(ScenarioKind::AccLk),
            _ => None,
        }
    }

    /// Position in [`ScenarioKind::ALL`].
    pub fn ordinal(self) -> usize {
        match self {
            ScenarioKind::Acc => 0,
            ScenarioKind::Lk => 1,
            ScenarioKind::AccLk => 2,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Co inputs: initial x, initial speed, duration of constant speed,
/// deceleration and its duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoParams {
    pub x: f64,
    pub v: f64,
    pub t_v: f64,
    pub a: f64,
    pub t_a: f64,
}

/// One sampled parameterization of a logical scenario.
///
/// `seed` and `index` identify the record: all noise substreams are keyed by
/// them, and `(kind, seed, index)` is the record identity used for pool
/// disjointness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcreteScenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub index: u64,
    /// Lane-center polynomial coefficients a0..a3.
    pub coefficients: [f64; 4],
    pub v_ego: f64,
    pub co: Option<CoParams>,
}

impl ConcreteScenario {
    pub fn polynomial(&self, x: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coefficients;
        a0 + x * (a1 + x * (a2 + x * a3))
    }

    pub fn identity(&self) -> (ScenarioKind, u64, u64) {
        (self.kind, self.seed, self.index)
    }

    /// The active inputs in table order (coefficients only when curved,
    /// Co inputs only when a Co exists).
    pub fn active_inputs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(10);
        if self.kind.has_curvature() {
            out.extend_from_slice(&self.coefficients);
        }
        out.push(self.v_ego);
        if let Some(co) = &self.co {
            out.extend_from_slice(&[co.x, co.v, co.t_v, co.a, co.t_a]);
        }
        out
    }

    /// Names matching [`ConcreteScenario::active_inputs`].
    pub fn input_names(kind: ScenarioKind) -> Vec<&'static str> {
        let mut out = Vec::new();
        if kind.has_curvature() {
            out.extend_from_slice(&["a0", "a1", "a2", "a3"]);
        }
        out.push("v_ego");
        if kind.has_co() {
            out.extend_from_slice(&["x_co", "v_co", "t_v_co", "a_co", "t_a_co"]);
        }
        out
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ranges = [(1.0, "a0"), (0.1, "a1"), (0.01, "a2"), (0.001, "a3")];
        for (c, (bound, name)) in self.coefficients.iter().zip(ranges) {
            if !(-bound..=bound).contains(c) {
                out.push(format!("{name} outside [{},{}]", -bound, bound));
            }
        }
        if !self.kind.has_curvature() && self.coefficients.iter().any(|&c| c != 0.0) {
            out.push(String::from("ACC scenario with nonzero lane coefficients"));
        }
        let v = self.v_ego;
        if !(8.0..=16.0).contains(&v) {
            out.push(String::from("v_ego outside [8,16]"));
        }
        match (&self.co, self.kind.has_co()) {
            (None, true) => out.push(format!("{} scenario without Co inputs", self.kind)),
            (Some(_), false) => out.push(String::from("LK scenario with Co inputs")),
            (Some(co), true) => {
                if !(-50.0 + v..=-50.0 + 2.0 * v).contains(&co.x) {
                    out.push(String::from("x_co outside [-50+v_ego,-50+2*v_ego]"));
                }
                if !(v - 4.0..=v + 4.0).contains(&co.v) {
                    out.push(String::from("v_co outside [v_ego-4,v_ego+4]"));
                }
                if !(0.0..=3.0).contains(&co.t_v) {
                    out.push(String::from("t_v_co outside [0,3]"));
                }
                if !(-8.0..=-1.0).contains(&co.a) {
                    out.push(String::from("a_co outside [-8,-1]"));
                }
                if !(1.0..=3.0).contains(&co.t_a) {
                    out.push(String::from("t_a_co outside [1,3]"));
                }
            }
            (None, false) => {}
        }
        out
    }
}

/// Longitudinal coordinate of lane sample `i`.
pub fn lane_sample_x(i: usize) -> f64 {
    LANE_X_START + LANE_X_SPAN * i as f64 / (LANE_POINTS - 1) as f64
}

/// Noisy lane: sampled centerline plus the two boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGeometry {
    pub sample_x: Vec<f64>,
    pub center_y: Vec<f64>,
    pub half_width: f64,
    pub left_y: Vec<f64>,
    pub right_y: Vec<f64>,
}

impl LaneGeometry {
    /// Builds the lane from centerline samples and the full lane width.
    pub fn from_center(center_y: Vec<f64>, width: f64) -> Self {
        let sample_x = (0..center_y.len()).map(lane_sample_x).collect();
        let half_width = width / 2.0;
        let left_y = center_y.iter().map(|y| y + half_width).collect();
        let right_y = center_y.iter().map(|y| y - half_width).collect();
        Self {
            sample_x,
            center_y,
            half_width,
            left_y,
            right_y,
        }
    }

    pub fn violations(&self, scenario: &ConcreteScenario) -> Vec<String> {
        let mut out = Vec::new();
        let lens = [
            self.sample_x.len(),
            self.center_y.len(),
            self.left_y.len(),
            self.right_y.len(),
        ];
        if lens.iter().any(|&n| n != LANE_POINTS) {
            out.push(format!("lane sample count {lens:?} ≠ {LANE_POINTS}"));
            return out;
        }
        for i in 0..LANE_POINTS {
            if self.sample_x[i] != lane_sample_x(i) {
                out.push(format!("lane sample_x[{i}] misplaced"));
            }
            if self.left_y[i] != self.center_y[i] + self.half_width
                || self.right_y[i] != self.center_y[i] - self.half_width
            {
                out.push(format!("lane boundary {i} not offset by half width"));
            }
            let offset = self.center_y[i] - scenario.polynomial(self.sample_x[i]);
            if offset.abs() > CENTER_NOISE + 1e-12 {
                out.push(format!("lane center {i} offset {offset} beyond ±{CENTER_NOISE}"));
            }
        }
        if (2.0 * self.half_width - LANE_WIDTH).abs() > LANE_WIDTH_NOISE + 1e-12 {
            out.push(format!("lane width {} outside 3.5±0.3", 2.0 * self.half_width));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

/// Time-indexed vehicle states at the logging rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<VehicleState>,
}

impl Trajectory {
    pub fn new(states: Vec<VehicleState>) -> Self {
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn violations(&self, label: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.states.len() != TRAJECTORY_LEN {
            out.push(format!(
                "{label}trajectory length {} ≠ {TRAJECTORY_LEN}",
                self.states.len()
            ));
        }
        for (k, w) in self.states.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - DT).abs() > 1e-12 {
                out.push(format!("{label}trajectory step {k} spacing ≠ {DT}"));
            }
        }
        for (k, s) in self.states.iter().enumerate() {
            if !(s.speed >= 0.0) {
                out.push(format!("{label}trajectory speed negative at state {k}"));
            }
        }
        out
    }
}

/// One simulated scene with its ground-truth metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scenario: ConcreteScenario,
    pub lanes: LaneGeometry,
    pub ego: Trajectory,
    pub co: Option<Trajectory>,
    pub metrics: EvaluationMetrics,
}

/// Checks every record invariant; an empty list means the record is valid.
pub fn validate(record: &SceneRecord) -> Vec<String> {
    let mut out = record.scenario.violations();
    out.extend(record.lanes.violations(&record.scenario));
    out.extend(record.ego.violations(""));
    match (&record.co, record.scenario.kind.has_co()) {
        (Some(co), true) => out.extend(co.violations("co ")),
        (None, true) => out.push(String::from("missing Co trajectory")),
        (Some(_), false) => out.push(String::from("LK record with Co trajectory")),
        (None, false) => {}
    }
    let m = &record.metrics;
    if !(m.p_lat_max >= 0.0) {
        out.push(String::from("p_lat_max negative"));
    }
    if matches!(m.d_min, Some(d) if !(d >= 0.0)) {
        out.push(String::from("d_min negative"));
    }
    if m.d_min.is_some() != record.scenario.kind.has_co() {
        out.push(String::from("d_min presence does not match scenario kind"));
    }
    if out.is_empty() {
        match metrics::evaluate(&record.ego, record.co.as_ref()) {
            Ok(recomputed) if recomputed == *m => {}
            Ok(_) => out.push(String::from("stored metrics differ from recomputation")),
            Err(e) => out.push(format!("metrics not recomputable: {e}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_scene, SamplerConfig};
    use crate::simulator::SimParams;

    fn record(kind: ScenarioKind) -> SceneRecord {
        let cfg = SamplerConfig::new(kind, 11, 4).unwrap();
        sample_scene(&cfg, 2, &SimParams::default()).unwrap()
    }

    #[test]
    fn generated_records_are_valid() {
        for kind in ScenarioKind::ALL {
            assert_eq!(validate(&record(kind)), Vec::<String>::new(), "{kind}");
        }
    }

    #[test]
    fn short_trajectory_is_reported() {
        let mut r = record(ScenarioKind::Acc);
        r.ego.states.pop();
        let v = validate(&r);
        assert!(v.contains(&String::from("trajectory length 25 ≠ 26")), "{v:?}");
    }

    #[test]
    fn fast_ego_is_reported() {
        let mut r = record(ScenarioKind::Acc);
        r.scenario.v_ego = 20.0;
        let v = validate(&r);
        assert!(v.contains(&String::from("v_ego outside [8,16]")), "{v:?}");
    }

    #[test]
    fn acc_curvature_and_lk_co_are_reported() {
        let mut r = record(ScenarioKind::Acc);
        r.scenario.coefficients[2] = 0.001;
        assert!(!validate(&r).is_empty());
        let mut r = record(ScenarioKind::Lk);
        r.scenario.co = record(ScenarioKind::Acc).scenario.co;
        assert!(validate(&r).contains(&String::from("LK scenario with Co inputs")));
    }

    #[test]
    fn tampered_metrics_are_reported() {
        let mut r = record(ScenarioKind::AccLk);
        r.metrics.a_min += 1e-9;
        assert_eq!(
            validate(&r),
            [String::from("stored metrics differ from recomputation")]
        );
    }

    #[test]
    fn lane_sample_grid() {
        assert_eq!(lane_sample_x(0), -55.0);
        assert_eq!(lane_sample_x(12), 0.0);
        assert_eq!(lane_sample_x(24), 55.0);
    }

    #[test]
    fn kinds_round_trip_names() {
        for kind in ScenarioKind::ALL {
            assert_eq!(ScenarioKind::parse(kind.as_str()), Some(kind));
        }
    }
}
