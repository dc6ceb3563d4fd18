//! Vectorized scene embedding.
//!
//! A scene becomes a set of polylines of 7-feature vectors
//! `[x_start, y_start, x_end, y_end, object_type, object_id, timestamp]`:
//! the left and right lane boundaries (24 vectors each, timestamp 0), the Co
//! trajectory (25 vectors, timestamp = segment end time) and the Ego's first
//! displacement (1 vector). The 24 remaining Ego displacements are the
//! prediction target. Coordinates are translated so the Ego starts at the
//! origin.

use alloc::vec::Vec;

use libm::{atan2, hypot};
use thiserror::Error;

use crate::scenario::{SceneRecord, Trajectory, VehicleState};
use crate::DT;

/// Features per vector.
pub const FEATURES: usize = 7;
/// Predicted Ego displacement vectors.
pub const TARGET_STEPS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorizeError {
    #[error("polyline {0} has no vectors")]
    EmptyPolyline(u32),
    #[error("scene has no polylines")]
    NoPolylines,
    #[error("scene has no Ego polyline")]
    NoEgo,
    #[error("expected {expected} displacement vectors, got {got}")]
    WrongStepCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectType {
    Lane = 0,
    Co = 1,
    Ego = 2,
}

impl ObjectType {
    pub fn code(self) -> f64 {
        self as u8 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneVector {
    pub x_start: f64,
    pub y_start: f64,
    pub x_end: f64,
    pub y_end: f64,
    pub object_type: ObjectType,
    pub object_id: u32,
    pub timestamp: f64,
}

impl SceneVector {
    pub fn features(&self) -> [f64; FEATURES] {
        [
            self.x_start,
            self.y_start,
            self.x_end,
            self.y_end,
            self.object_type.code(),
            self.object_id as f64,
            self.timestamp,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub object_id: u32,
    pub object_type: ObjectType,
    pub vectors: Vec<SceneVector>,
}

impl Polyline {
    fn from_points(
        object_id: u32,
        object_type: ObjectType,
        points: &[[f64; 2]],
        timestamps: impl Fn(usize) -> f64,
    ) -> Self {
        let vectors = points
            .windows(2)
            .enumerate()
            .map(|(k, w)| SceneVector {
                x_start: w[0][0],
                y_start: w[0][1],
                x_end: w[1][0],
                y_end: w[1][1],
                object_type,
                object_id,
                timestamp: timestamps(k),
            })
            .collect();
        Self {
            object_id,
            object_type,
            vectors,
        }
    }

    /// Whether every vector ends exactly where the next one starts.
    pub fn is_connected(&self) -> bool {
        self.vectors
            .windows(2)
            .all(|w| w[0].x_end == w[1].x_start && w[0].y_end == w[1].y_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedScene {
    /// Lane polylines by id, then the Co, then the Ego.
    pub polylines: Vec<Polyline>,
    /// Ego displacements for t = 0.2→0.4 through 4.8→5.0, in m.
    pub ego_target: Vec<[f64; 2]>,
    /// World position of the normalized origin.
    pub normalization_offset: [f64; 2],
}

impl VectorizedScene {
    pub fn ego_index(&self) -> Option<usize> {
        self.polylines
            .iter()
            .position(|p| p.object_type == ObjectType::Ego)
    }

    pub fn vector_count(&self) -> usize {
        self.polylines.iter().map(|p| p.vectors.len()).sum()
    }

    /// The Ego's input vector (normalized frame).
    pub fn ego_vector(&self) -> Option<&SceneVector> {
        self.ego_index()
            .and_then(|i| self.polylines[i].vectors.first())
    }
}

/// Dense `num_vectors × 7` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<[f64; FEATURES]>,
}

impl FeatureMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), FEATURES)
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

fn positions(traj: &Trajectory, offset: [f64; 2]) -> Vec<[f64; 2]> {
    traj.states
        .iter()
        .map(|s| [s.x - offset[0], s.y - offset[1]])
        .collect()
}

/// Builds the scene embedding of a simulated record.
pub fn vectorize(record: &SceneRecord) -> VectorizedScene {
    let ego = &record.ego.states;
    let offset = [ego[0].x, ego[0].y];
    let lanes = &record.lanes;

    let boundary = |ys: &[f64]| -> Vec<[f64; 2]> {
        lanes
            .sample_x
            .iter()
            .zip(ys)
            .map(|(&x, &y)| [x - offset[0], y - offset[1]])
            .collect()
    };
    let mut polylines = Vec::with_capacity(4);
    polylines.push(Polyline::from_points(0, ObjectType::Lane, &boundary(&lanes.left_y), |_| 0.0));
    polylines.push(Polyline::from_points(1, ObjectType::Lane, &boundary(&lanes.right_y), |_| 0.0));
    if let Some(co) = &record.co {
        let id = polylines.len() as u32;
        let stamps = |k: usize| co.states[k + 1].t;
        polylines.push(Polyline::from_points(id, ObjectType::Co, &positions(co, offset), stamps));
    }
    let id = polylines.len() as u32;
    let ego_points = positions(&record.ego, offset);
    polylines.push(Polyline::from_points(id, ObjectType::Ego, &ego_points[..2], |_| ego[1].t));

    let ego_target = ego
        .windows(2)
        .skip(1)
        .map(|w| [w[1].x - w[0].x, w[1].y - w[0].y])
        .collect();
    VectorizedScene {
        polylines,
        ego_target,
        normalization_offset: offset,
    }
}

/// Stacks all vectors: lanes by object id, then the Co, then the Ego.
pub fn feature_matrix(scene: &VectorizedScene) -> Result<FeatureMatrix, VectorizeError> {
    if scene.polylines.is_empty() {
        return Err(VectorizeError::NoPolylines);
    }
    let mut order: Vec<&Polyline> = scene.polylines.iter().collect();
    order.sort_by_key(|p| (p.object_type, p.object_id));
    let mut rows = Vec::with_capacity(scene.vector_count());
    for p in order {
        if p.vectors.is_empty() {
            return Err(VectorizeError::EmptyPolyline(p.object_id));
        }
        rows.extend(p.vectors.iter().map(SceneVector::features));
    }
    Ok(FeatureMatrix { rows })
}

/// Rebuilds a world-frame Ego trajectory from its input vector and 24
/// displacement vectors.
///
/// Each state's heading and speed describe the displacement leaving it, so
/// for simulated data they match the logged dynamics; the final state repeats
/// the last displacement's values.
pub fn reconstruct_trajectory(
    scene: &VectorizedScene,
    predicted: &[[f64; 2]],
) -> Result<Trajectory, VectorizeError> {
    if predicted.len() != TARGET_STEPS {
        return Err(VectorizeError::WrongStepCount {
            expected: TARGET_STEPS,
            got: predicted.len(),
        });
    }
    let v = scene.ego_vector().ok_or(VectorizeError::NoEgo)?;
    let [ox, oy] = scene.normalization_offset;

    let mut displacements = Vec::with_capacity(TARGET_STEPS + 1);
    displacements.push([v.x_end - v.x_start, v.y_end - v.y_start]);
    displacements.extend_from_slice(predicted);

    let mut points = Vec::with_capacity(TARGET_STEPS + 2);
    points.push([v.x_start, v.y_start]);
    points.push([v.x_end, v.y_end]);
    for d in predicted {
        let [x, y] = *points.last().unwrap();
        points.push([x + d[0], y + d[1]]);
    }

    let states = points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let d = displacements[k.min(TARGET_STEPS)];
            VehicleState {
                t: k as f64 * DT,
                x: p[0] + ox,
                y: p[1] + oy,
                heading: atan2(d[1], d[0]),
                speed: hypot(d[0], d[1]) / DT,
            }
        })
        .collect();
    Ok(Trajectory::new(states))
}
