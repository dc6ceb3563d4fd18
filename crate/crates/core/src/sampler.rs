//! Uniform sampling of concrete scenarios and noisy lane geometry.
//!
//! Draw order inside the `Inputs` substream follows the input table: a0..a3
//! (curved kinds only), v_ego, then x_co, v_co, t_v_co, a_co, t_a_co (kinds
//! with a Co). Dependent ranges use the already drawn v_ego. The `LaneNoise`
//! substream draws the width offset first, then the 25 center offsets. The
//! `Dynamics` substream is consumed by the simulator.

use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::{Purpose, Substream, UnitSource};
use crate::scenario::{
    lane_sample_x, CoParams, ConcreteScenario, LaneGeometry, SceneRecord, ScenarioKind,
    CENTER_NOISE, LANE_WIDTH, LANE_WIDTH_NOISE,
};
use crate::simulator::{simulate, SimParams};
use crate::LANE_POINTS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplerError {
    #[error("sample count must be at least 1")]
    EmptyCount,
    #[error("index {index} out of range for count {count}")]
    IndexOutOfRange { index: u64, count: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub kind: ScenarioKind,
    pub master_seed: u64,
    count: u64,
}

impl SamplerConfig {
    pub fn new(kind: ScenarioKind, master_seed: u64, count: u64) -> Result<Self, SamplerError> {
        if count == 0 {
            return Err(SamplerError::EmptyCount);
        }
        Ok(Self {
            kind,
            master_seed,
            count,
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn check(&self, index: u64) -> Result<(), SamplerError> {
        if index >= self.count {
            return Err(SamplerError::IndexOutOfRange {
                index,
                count: self.count,
            });
        }
        Ok(())
    }
}

/// Samples the concrete scenario at `index` from its own substream.
pub fn sample_concrete(config: &SamplerConfig, index: u64) -> Result<ConcreteScenario, SamplerError> {
    config.check(index)?;
    let mut src = Substream::new(config.master_seed, index, Purpose::Inputs);
    Ok(draw_concrete(config.kind, config.master_seed, index, &mut src))
}

/// Draws the active inputs of `kind` from `src` in table order.
pub fn draw_concrete(
    kind: ScenarioKind,
    seed: u64,
    index: u64,
    src: &mut impl UnitSource,
) -> ConcreteScenario {
    let mut coefficients = [0.0; 4];
    if kind.has_curvature() {
        for (c, bound) in coefficients.iter_mut().zip([1.0, 0.1, 0.01, 0.001]) {
            *c = src.uniform(-bound, bound);
        }
    }
    let v_ego = src.uniform(8.0, 16.0);
    let co = kind.has_co().then(|| CoParams {
        x: src.uniform(-50.0 + v_ego, -50.0 + 2.0 * v_ego),
        v: src.uniform(v_ego - 4.0, v_ego + 4.0),
        t_v: src.uniform(0.0, 3.0),
        a: src.uniform(-8.0, -1.0),
        t_a: src.uniform(1.0, 3.0),
    });
    ConcreteScenario {
        kind,
        seed,
        index,
        coefficients,
        v_ego,
        co,
    }
}

/// Noisy lane for `scenario`: one width offset, then one center offset per
/// sample point (both boundaries shift together).
pub fn sample_lane_geometry(scenario: &ConcreteScenario, src: &mut impl UnitSource) -> LaneGeometry {
    let width = LANE_WIDTH + src.symmetric(LANE_WIDTH_NOISE);
    let center_y: Vec<f64> = (0..LANE_POINTS)
        .map(|i| scenario.polynomial(lane_sample_x(i)) + src.symmetric(CENTER_NOISE))
        .collect();
    LaneGeometry::from_center(center_y, width)
}

/// Samples, simulates and evaluates the scene at `index`.
pub fn sample_scene(
    config: &SamplerConfig,
    index: u64,
    params: &SimParams,
) -> Result<SceneRecord, SamplerError> {
    let scenario = sample_concrete(config, index)?;
    let lanes = sample_lane_geometry(
        &scenario,
        &mut Substream::new(config.master_seed, index, Purpose::LaneNoise),
    );
    let mut dynamics = Substream::new(config.master_seed, index, Purpose::Dynamics);
    Ok(simulate(&scenario, lanes, &mut dynamics, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::FixedQuantile;

    #[test]
    fn midpoint_quantiles_give_range_midpoints() {
        let s = draw_concrete(ScenarioKind::AccLk, 0, 0, &mut FixedQuantile(0.5));
        assert_eq!(s.coefficients, [0.0; 4]);
        assert_eq!(s.v_ego, 12.0);
        let co = s.co.unwrap();
        // x_co midpoint of [-50+12, -50+24]
        assert_eq!(co.x, -32.0);
        assert_eq!(co.v, 12.0);
        assert_eq!(co.t_v, 1.5);
        assert_eq!(co.a, -4.5);
        assert_eq!(co.t_a, 2.0);
    }

    #[test]
    fn acc_is_straight_and_lk_has_no_co() {
        for seed in 0..20 {
            let acc = SamplerConfig::new(ScenarioKind::Acc, seed, 5).unwrap();
            assert_eq!(sample_concrete(&acc, 4).unwrap().coefficients, [0.0; 4]);
            let lk = SamplerConfig::new(ScenarioKind::Lk, seed, 5).unwrap();
            assert!(sample_concrete(&lk, 4).unwrap().co.is_none());
        }
    }

    #[test]
    fn index_and_count_errors() {
        assert_eq!(
            SamplerConfig::new(ScenarioKind::Acc, 0, 0),
            Err(SamplerError::EmptyCount)
        );
        let cfg = SamplerConfig::new(ScenarioKind::Acc, 0, 3).unwrap();
        assert_eq!(
            sample_concrete(&cfg, 3),
            Err(SamplerError::IndexOutOfRange { index: 3, count: 3 })
        );
    }

    #[test]
    fn zero_noise_lanes() {
        let mut s = draw_concrete(ScenarioKind::Lk, 0, 0, &mut FixedQuantile(0.5));
        s.coefficients = [1.0, 0.0, 0.0, 0.0];
        let lanes = sample_lane_geometry(&s, &mut FixedQuantile(0.5));
        assert!(lanes.center_y.iter().all(|&y| y == 1.0));
        assert_eq!(lanes.half_width * 2.0, 3.5);
        assert!(lanes.left_y.iter().all(|&y| y == 2.75));
        assert_eq!(lanes.sample_x[12], 0.0);

        s.coefficients = [0.0, 0.1, 0.0, 0.0];
        let lanes = sample_lane_geometry(&s, &mut FixedQuantile(0.5));
        for (x, y) in lanes.sample_x.iter().zip(&lanes.center_y) {
            assert_eq!(*y, 0.1 * x);
        }
        assert_eq!(s.polynomial(10.0), 1.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = SamplerConfig::new(ScenarioKind::AccLk, 99, 10).unwrap();
        let p = SimParams::default();
        assert_eq!(sample_scene(&cfg, 7, &p).unwrap(), sample_scene(&cfg, 7, &p).unwrap());
        assert_ne!(sample_scene(&cfg, 7, &p).unwrap(), sample_scene(&cfg, 6, &p).unwrap());
    }

    /// Over 10,000 draws every input reaches within 2% of both ends of its
    /// range; dependent inputs are checked on their v_ego-relative range.
    #[test]
    fn uniform_coverage_reaches_range_ends() {
        let cfg = SamplerConfig::new(ScenarioKind::AccLk, 2024, 10_000).unwrap();
        let ranges = [
            (-1.0, 1.0),
            (-0.1, 0.1),
            (-0.01, 0.01),
            (-0.001, 0.001),
            (8.0, 16.0),
            (0.0, 1.0),
            (0.0, 1.0),
            (0.0, 3.0),
            (-8.0, -1.0),
            (1.0, 3.0),
        ];
        let mut lo = [f64::INFINITY; 10];
        let mut hi = [f64::NEG_INFINITY; 10];
        for i in 0..10_000 {
            let s = sample_concrete(&cfg, i).unwrap();
            let co = s.co.unwrap();
            let v = s.v_ego;
            assert!(-50.0 + v <= co.x && co.x <= -50.0 + 2.0 * v);
            assert!(v - 4.0 <= co.v && co.v <= v + 4.0);
            let mut x = s.active_inputs();
            x[5] = (co.x - (-50.0 + v)) / v;
            x[6] = (co.v - (v - 4.0)) / 8.0;
            for j in 0..10 {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        for (j, (a, b)) in ranges.iter().enumerate() {
            let tol = 0.02 * (b - a);
            assert!(lo[j] >= a - 1e-12 && lo[j] - a <= tol, "input {j} min {}", lo[j]);
            assert!(hi[j] <= b + 1e-12 && b - hi[j] <= tol, "input {j} max {}", hi[j]);
        }
    }
}
