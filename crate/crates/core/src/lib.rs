//! Scenario sampling, ground-truth simulation, vectorized scene embeddings,
//! a polyline-attention motion predictor and an extremely-randomized-trees
//! metamodel for scenario-based testing of automated vehicles.
//!
//! The crate is `no_std` (it needs `alloc`). All floating-point transcendental
//! functions go through `libm`, so results are bit-identical across platforms.
//! File formats, the command-line interface and threading live in the `scenvec`
//! companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod metamodel;
pub mod metrics;
pub mod predictor;
pub mod rng;
pub mod sampler;
pub mod scenario;
pub mod simulator;
pub mod split;
pub mod vectorizer;

pub use metrics::EvaluationMetrics;
pub use scenario::{
    CoParams, ConcreteScenario, LaneGeometry, SceneRecord, ScenarioKind, Trajectory, VehicleState,
};

/// Simulation and logging time step in seconds.
pub const DT: f64 = 0.2;
/// Simulated horizon in seconds.
pub const HORIZON: f64 = 5.0;
/// Number of logged states per trajectory (t = 0.0, 0.2, ..., 5.0).
pub const TRAJECTORY_LEN: usize = 26;
/// Number of lane sample points along x.
pub const LANE_POINTS: usize = 25;
