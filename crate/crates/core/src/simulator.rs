//! Ground-truth Ego and Co trajectories.
//!
//! The Ego is a kinematic bicycle integrated with explicit Euler at `dt`,
//! steered by pure pursuit toward the noisy lane centerline. In scenes with a
//! Co its speed follows a proportional time-gap controller; otherwise it holds
//! `v_ego`. The Co moves along the centerline by arc length at its scripted
//! speed profile plus per-step speed noise.
//!
//! `Dynamics` substream draw order, per logged step k = 0..=25: Ego heading
//! noise, then (with a Co) Co speed noise and Co heading noise. Heading noise
//! only affects the logged value.

use alloc::vec::Vec;

use libm::{atan, atan2, cos, hypot, sin, sqrt, tan};
use thiserror::Error;

use crate::metrics;
use crate::rng::UnitSource;
use crate::scenario::{ConcreteScenario, LaneGeometry, SceneRecord, Trajectory, VehicleState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("scenario has no Co")]
    NoCo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub dt: f64,
    pub horizon: f64,
    /// Proportional gain on the gap error, 1/s².
    pub acc_gain: f64,
    pub time_gap: f64,
    pub accel_bounds: [f64; 2],
    pub wheelbase: f64,
    pub lookahead_min: f64,
    /// Speed-proportional lookahead, s.
    pub lookahead_factor: f64,
    pub ego_x0: f64,
    /// Logged heading noise bound, rad (±2.9°).
    pub orientation_noise_bound: f64,
    pub co_speed_noise_bound: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: crate::DT,
            horizon: crate::HORIZON,
            acc_gain: 0.3,
            time_gap: 2.0,
            accel_bounds: [-8.0, 2.0],
            wheelbase: 2.8,
            lookahead_min: 5.0,
            lookahead_factor: 0.5,
            ego_x0: -50.0,
            orientation_noise_bound: 0.0506,
            co_speed_noise_bound: 0.1,
        }
    }
}

impl SimParams {
    /// Number of integration steps (`horizon / dt`).
    pub fn steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }

    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.dt > 0.0) {
            out.push("dt must be positive");
        }
        let ratio = self.horizon / self.dt;
        if (ratio - libm::round(ratio)).abs() > 1e-9 || ratio < 1.0 {
            out.push("horizon must be a positive integer multiple of dt");
        }
        if !(self.accel_bounds[0] < 0.0 && 0.0 < self.accel_bounds[1]) {
            out.push("acceleration bounds must straddle zero");
        }
        if !(self.wheelbase > 0.0 && self.lookahead_min > 0.0) {
            out.push("wheelbase and minimum lookahead must be positive");
        }
        out
    }
}

/// Piecewise-linear centerline through the lane samples, extended along its
/// end segments so arc length is defined on the whole real line.
#[derive(Debug, Clone)]
pub struct Centerline {
    points: Vec<[f64; 2]>,
    /// Cumulative arc length at each point.
    arc: Vec<f64>,
}

impl Centerline {
    pub fn new(lanes: &LaneGeometry) -> Self {
        let points: Vec<[f64; 2]> = lanes
            .sample_x
            .iter()
            .zip(&lanes.center_y)
            .map(|(&x, &y)| [x, y])
            .collect();
        let mut arc = Vec::with_capacity(points.len());
        let mut s = 0.0;
        arc.push(s);
        for w in points.windows(2) {
            s += hypot(w[1][0] - w[0][0], w[1][1] - w[0][1]);
            arc.push(s);
        }
        Self { points, arc }
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn end(&self) -> [f64; 2] {
        *self.points.last().unwrap()
    }

    fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Segment whose x-extent contains `x` (end segments extend outward).
    fn segment_at_x(&self, x: f64) -> usize {
        let i = self.points.partition_point(|p| p[0] <= x);
        i.saturating_sub(1).min(self.segments() - 1)
    }

    fn segment_at_arc(&self, s: f64) -> usize {
        let i = self.arc.partition_point(|&a| a <= s);
        i.saturating_sub(1).min(self.segments() - 1)
    }

    /// Linearly interpolated lateral coordinate at `x`.
    pub fn y_at(&self, x: f64) -> f64 {
        let i = self.segment_at_x(x);
        let [x0, y0] = self.points[i];
        let [x1, y1] = self.points[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn tangent_heading(&self, segment: usize) -> f64 {
        let [x0, y0] = self.points[segment];
        let [x1, y1] = self.points[segment + 1];
        atan2(y1 - y0, x1 - x0)
    }

    /// Arc length of the centerline point with abscissa `x`.
    pub fn arc_at_x(&self, x: f64) -> f64 {
        let i = self.segment_at_x(x);
        let [x0, _] = self.points[i];
        let [x1, _] = self.points[i + 1];
        let f = (x - x0) / (x1 - x0);
        self.arc[i] + f * (self.arc[i + 1] - self.arc[i])
    }

    /// Point and tangent heading at arc length `s`.
    pub fn at_arc(&self, s: f64) -> ([f64; 2], f64) {
        let i = self.segment_at_arc(s);
        let [x0, y0] = self.points[i];
        let [x1, y1] = self.points[i + 1];
        let f = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        ([x0 + f * (x1 - x0), y0 + f * (y1 - y0)], atan2(y1 - y0, x1 - x0))
    }

    /// Closest point on the (unextended) polyline: segment and parameter.
    fn project(&self, p: [f64; 2]) -> (usize, f64) {
        let mut best = (0, 0.0, f64::INFINITY);
        for i in 0..self.segments() {
            let [x0, y0] = self.points[i];
            let [x1, y1] = self.points[i + 1];
            let (dx, dy) = (x1 - x0, y1 - y0);
            let f = (((p[0] - x0) * dx + (p[1] - y0) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            let d = hypot(x0 + f * dx - p[0], y0 + f * dy - p[1]);
            if d < best.2 {
                best = (i, f, d);
            }
        }
        (best.0, best.1)
    }

    /// First centerline point ahead of the projection of `p` at Euclidean
    /// distance `lookahead` from `p`; the final point if the road ends first.
    pub fn lookahead_point(&self, p: [f64; 2], lookahead: f64) -> [f64; 2] {
        let (seg, f0) = self.project(p);
        for i in seg..self.segments() {
            let [x0, y0] = self.points[i];
            let [x1, y1] = self.points[i + 1];
            let (dx, dy) = (x1 - x0, y1 - y0);
            let (ox, oy) = (x0 - p[0], y0 - p[1]);
            // |o + f d|² = L²
            let a = dx * dx + dy * dy;
            let b = 2.0 * (ox * dx + oy * dy);
            let c = ox * ox + oy * oy - lookahead * lookahead;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            let f = (-b + sqrt(disc)) / (2.0 * a);
            let lo = if i == seg { f0 } else { 0.0 };
            if f >= lo && f <= 1.0 {
                return [x0 + f * dx, y0 + f * dy];
            }
        }
        self.end()
    }
}

/// Scripted Co speed: constant, then decelerating, then held.
pub fn co_speed_profile(t: f64, scenario: &ConcreteScenario) -> Result<f64, SimError> {
    let co = scenario.co.as_ref().ok_or(SimError::NoCo)?;
    let t = t.min(co.t_v + co.t_a);
    Ok(if t < co.t_v {
        co.v
    } else {
        (co.v + co.a * (t - co.t_v)).max(0.0)
    })
}

/// Proportional time-gap controller, clamped to the acceleration bounds.
pub fn acc_command(gap: f64, v_ego: f64, params: &SimParams) -> f64 {
    let [lo, hi] = params.accel_bounds;
    (params.acc_gain * (gap - params.time_gap * v_ego)).clamp(lo, hi)
}

/// Pure-pursuit steering angle toward the centerline.
pub fn pure_pursuit_steer(state: &VehicleState, centerline: &Centerline, params: &SimParams) -> f64 {
    let lookahead = params.lookahead_min.max(params.lookahead_factor * state.speed);
    let target = centerline.lookahead_point([state.x, state.y], lookahead);
    let (dx, dy) = (target[0] - state.x, target[1] - state.y);
    if hypot(dx, dy) < 1e-9 {
        return 0.0;
    }
    let alpha = atan2(dy, dx) - state.heading;
    atan(2.0 * params.wheelbase * sin(alpha) / lookahead)
}

/// Simulates one scene and computes its ground-truth metrics.
pub fn simulate(
    scenario: &ConcreteScenario,
    lanes: LaneGeometry,
    noise: &mut impl UnitSource,
    params: &SimParams,
) -> SceneRecord {
    let centerline = Centerline::new(&lanes);
    let steps = params.steps();

    let x0 = params.ego_x0;
    let mut ego = VehicleState {
        t: 0.0,
        x: x0,
        y: centerline.y_at(x0),
        heading: centerline.tangent_heading(centerline.segment_at_x(x0)),
        speed: scenario.v_ego,
    };
    let mut co_arc = scenario.co.map(|co| centerline.arc_at_x(co.x));

    let mut ego_log = Vec::with_capacity(steps + 1);
    let mut co_log = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * params.dt;
        ego.t = t;
        ego_log.push(VehicleState {
            heading: ego.heading + noise.symmetric(params.orientation_noise_bound),
            ..ego
        });

        let mut gap = None;
        if let Some(s) = co_arc.as_mut() {
            let speed = (co_speed_profile(t, scenario).unwrap()
                + noise.symmetric(params.co_speed_noise_bound))
            .max(0.0);
            let (p, heading) = centerline.at_arc(*s);
            co_log.push(VehicleState {
                t,
                x: p[0],
                y: p[1],
                heading: heading + noise.symmetric(params.orientation_noise_bound),
                speed,
            });
            gap = Some(hypot(p[0] - ego.x, p[1] - ego.y));
            *s += speed * params.dt;
        }
        if k == steps {
            break;
        }

        let delta = pure_pursuit_steer(&ego, &centerline, params);
        let v = ego.speed;
        ego.x += v * cos(ego.heading) * params.dt;
        ego.y += v * sin(ego.heading) * params.dt;
        ego.heading += v * tan(delta) / params.wheelbase * params.dt;
        if let Some(gap) = gap {
            ego.speed = (v + acc_command(gap, v, params) * params.dt).max(0.0);
        }
    }

    let ego = Trajectory::new(ego_log);
    let co = scenario.co.map(|_| Trajectory::new(co_log));
    let metrics = metrics::evaluate(&ego, co.as_ref()).expect("simulated trajectories are well formed");
    SceneRecord {
        scenario: *scenario,
        lanes,
        ego,
        co,
        metrics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{FixedQuantile, Purpose, Substream};
    use crate::sampler::{draw_concrete, sample_lane_geometry, sample_scene, SamplerConfig};
    use crate::scenario::{CoParams, ScenarioKind};

    fn scenario(kind: ScenarioKind) -> ConcreteScenario {
        draw_concrete(kind, 0, 0, &mut FixedQuantile(0.5))
    }

    fn straight_lanes() -> LaneGeometry {
        sample_lane_geometry(&scenario(ScenarioKind::Acc), &mut FixedQuantile(0.5))
    }

    #[test]
    fn co_profile_phases() {
        let mut s = scenario(ScenarioKind::Acc);
        s.co = Some(CoParams { x: -30.0, v: 12.0, t_v: 1.0, a: -4.0, t_a: 2.0 });
        assert_eq!(co_speed_profile(0.5, &s).unwrap(), 12.0);
        assert_eq!(co_speed_profile(2.0, &s).unwrap(), 8.0);
        assert_eq!(co_speed_profile(4.5, &s).unwrap(), 4.0);
        s.co = Some(CoParams { x: -30.0, v: 2.0, t_v: 0.0, a: -8.0, t_a: 3.0 });
        assert_eq!(co_speed_profile(1.0, &s).unwrap(), 0.0);
        assert_eq!(co_speed_profile(1.0, &scenario(ScenarioKind::Lk)), Err(SimError::NoCo));
    }

    #[test]
    fn acc_command_cases() {
        let p = SimParams::default();
        assert_eq!(acc_command(20.0, 10.0, &p), 0.0);
        assert!((acc_command(10.0, 10.0, &p) + 3.0).abs() < 1e-12);
        assert_eq!(acc_command(40.0, 10.0, &p), 2.0);
        assert_eq!(acc_command(0.0, 16.0, &p), -8.0);
    }

    #[test]
    fn pure_pursuit_geometry() {
        let p = SimParams::default();
        let line = Centerline::new(&straight_lanes());
        let on = VehicleState { t: 0.0, x: -20.0, y: 0.0, heading: 0.0, speed: 8.0 };
        assert_eq!(pure_pursuit_steer(&on, &line, &p), 0.0);

        let left = VehicleState { y: 1.0, ..on };
        let alpha = atan2(-1.0, sqrt(25.0 - 1.0));
        let expected = atan(2.0 * 2.8 * sin(alpha) / 5.0);
        let got = pure_pursuit_steer(&left, &line, &p);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");

        let right = VehicleState { y: -1.0, ..on };
        assert_eq!(pure_pursuit_steer(&right, &line, &p), -got);
    }

    #[test]
    fn lookahead_clamps_at_road_end() {
        let line = Centerline::new(&straight_lanes());
        assert_eq!(line.lookahead_point([53.0, 0.0], 5.0), [55.0, 0.0]);
    }

    #[test]
    fn constant_gap_equilibrium() {
        let mut s = scenario(ScenarioKind::Acc);
        s.v_ego = 10.0;
        s.co = Some(CoParams { x: -30.0, v: 10.0, t_v: 10.0, a: -1.0, t_a: 1.0 });
        let r = simulate(&s, straight_lanes(), &mut FixedQuantile(0.5), &SimParams::default());
        assert!(r.metrics.a_min.abs() <= 1e-9, "{}", r.metrics.a_min);
        assert!((r.metrics.d_min.unwrap() - 20.0).abs() <= 1e-9);
    }

    #[test]
    fn straight_lane_keeping() {
        let mut s = scenario(ScenarioKind::Lk);
        s.v_ego = 10.0;
        let r = simulate(&s, straight_lanes(), &mut FixedQuantile(0.5), &SimParams::default());
        assert!(r.ego.states.iter().all(|st| st.y == 0.0));
        assert!(r.metrics.p_lat_max <= 1e-9);
        assert!((r.ego.states[25].x - 0.0).abs() < 1e-9);
        for w in r.ego.states.windows(2) {
            assert!((w[1].x - w[0].x - 10.0 * 0.2).abs() < 1e-12);
        }
    }

    /// Independent scripted integrator for straight, noise-free ACC.
    fn scripted_acc(v_ego: f64, co: CoParams) -> f64 {
        let (mut x, mut v) = (-50.0f64, v_ego);
        let mut xc = co.x;
        let mut speeds = std::vec![v];
        for k in 0..25 {
            let t = k as f64 * 0.2;
            let tc = t.min(co.t_v + co.t_a);
            let vc = if tc < co.t_v { co.v } else { (co.v + co.a * (tc - co.t_v)).max(0.0) };
            let a = (0.3 * ((xc - x) - 2.0 * v)).clamp(-8.0, 2.0);
            x += v * 0.2;
            xc += vc * 0.2;
            v = (v + a * 0.2).max(0.0);
            speeds.push(v);
        }
        speeds.windows(2).map(|w| (w[1] - w[0]) / 0.2).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn hard_braking_co_matches_scripted_integrator() {
        let mut s = scenario(ScenarioKind::Acc);
        s.v_ego = 12.0;
        let co = CoParams { x: -30.0, v: 12.0, t_v: 0.0, a: -8.0, t_a: 3.0 };
        s.co = Some(co);
        let r = simulate(&s, straight_lanes(), &mut FixedQuantile(0.5), &SimParams::default());
        let a_min = r.metrics.a_min;
        assert!(a_min < 0.0 && a_min >= -8.0, "{a_min}");
        assert!((a_min - scripted_acc(12.0, co)).abs() < 1e-9);
    }

    #[test]
    fn simulated_invariants() {
        for kind in ScenarioKind::ALL {
            let cfg = SamplerConfig::new(kind, 5, 40).unwrap();
            for i in 0..40 {
                let r = sample_scene(&cfg, i, &SimParams::default()).unwrap();
                let line = Centerline::new(&r.lanes);
                assert!(r.ego.states.iter().all(|s| s.speed >= 0.0));
                if let Some(co) = &r.co {
                    for s in &co.states {
                        assert!(s.speed >= 0.0);
                        assert!((line.y_at(s.x) - s.y).abs() < 1e-9);
                    }
                }
                assert!(crate::scenario::validate(&r).is_empty());
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = scenario(ScenarioKind::AccLk);
        let lanes = sample_lane_geometry(&s, &mut Substream::new(1, 1, Purpose::LaneNoise));
        let run = || {
            simulate(&s, lanes.clone(), &mut Substream::new(1, 1, Purpose::Dynamics), &SimParams::default())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn default_params_are_valid() {
        assert!(SimParams::default().violations().is_empty());
        assert_eq!(SimParams::default().steps(), 25);
        let bad = SimParams { accel_bounds: [1.0, 2.0], ..SimParams::default() };
        assert!(!bad.violations().is_empty());
    }
}
