//! Scene files and training mixes.
//!
//! A scene file is JSON Lines: one object per record with keys in the order
//! `schema_version, scenario, lanes, ego, co, metrics`. Trajectories are
//! arrays of `[t, x, y, heading, speed]` rows. Records are validated on read,
//! including a recomputation of the stored metrics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use scenvec_core::rng::{shuffle, Purpose, Substream};
use scenvec_core::scenario::validate;
use scenvec_core::{
    CoParams, ConcreteScenario, EvaluationMetrics, LaneGeometry, SceneRecord, ScenarioKind, Trajectory, VehicleState,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenvec_core::split::{split_train_val, SplitError};

use crate::json;

pub const SCHEMA_VERSION: u32 = 1;

/// Default number of held-out test records per kind.
pub const DEFAULT_TEST_SIZE: usize = 1000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { path: PathBuf, line: usize, found: u32 },
    #[error("{path}:{line}: invalid record: {}", .problems.join("; "))]
    Invalid {
        path: PathBuf,
        line: usize,
        problems: Vec<String>,
    },
    #[error("mix must request at least one record")]
    EmptyMix,
    #[error("{kind}: need {needed} records ({requested} training + {test} test), source has {available}")]
    Insufficient {
        kind: ScenarioKind,
        requested: usize,
        test: usize,
        needed: usize,
        available: usize,
    },
    #[error("{kind} source contains {found} records")]
    WrongKind { kind: ScenarioKind, found: ScenarioKind },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDto {
    kind: String,
    seed: u64,
    index: u64,
    coefficients: [f64; 4],
    v_ego: f64,
    co: Option<CoDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoDto {
    x: f64,
    v: f64,
    t_v: f64,
    a: f64,
    t_a: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LanesDto {
    sample_x: Vec<f64>,
    center_y: Vec<f64>,
    half_width: f64,
    left_y: Vec<f64>,
    right_y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsDto {
    a_min: f64,
    p_lat_max: f64,
    d_min: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordDto {
    schema_version: u32,
    scenario: ScenarioDto,
    lanes: LanesDto,
    ego: Vec<[f64; 5]>,
    co: Option<Vec<[f64; 5]>>,
    metrics: MetricsDto,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn rows(t: &Trajectory) -> Vec<[f64; 5]> {
    t.states.iter().map(|s| [s.t, s.x, s.y, s.heading, s.speed]).collect()
}

fn trajectory(rows: &[[f64; 5]]) -> Trajectory {
    Trajectory::new(
        rows.iter()
            .map(|&[t, x, y, heading, speed]| VehicleState { t, x, y, heading, speed })
            .collect(),
    )
}

impl From<&SceneRecord> for RecordDto {
    fn from(r: &SceneRecord) -> Self {
        let s = &r.scenario;
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioDto {
                kind: s.kind.as_str().into(),
                seed: s.seed,
                index: s.index,
                coefficients: s.coefficients,
                v_ego: s.v_ego,
                co: s.co.map(|c| CoDto { x: c.x, v: c.v, t_v: c.t_v, a: c.a, t_a: c.t_a }),
            },
            lanes: LanesDto {
                sample_x: r.lanes.sample_x.clone(),
                center_y: r.lanes.center_y.clone(),
                half_width: r.lanes.half_width,
                left_y: r.lanes.left_y.clone(),
                right_y: r.lanes.right_y.clone(),
            },
            ego: rows(&r.ego),
            co: r.co.as_ref().map(rows),
            metrics: MetricsDto {
                a_min: r.metrics.a_min,
                p_lat_max: r.metrics.p_lat_max,
                d_min: r.metrics.d_min,
            },
        }
    }
}

impl RecordDto {
    fn into_record(self) -> Result<SceneRecord, String> {
        let kind = ScenarioKind::parse(&self.scenario.kind).ok_or_else(|| format!("unknown kind {:?}", self.scenario.kind))?;
        let s = self.scenario;
        Ok(SceneRecord {
            scenario: ConcreteScenario {
                kind,
                seed: s.seed,
                index: s.index,
                coefficients: s.coefficients,
                v_ego: s.v_ego,
                co: s.co.map(|c| CoParams { x: c.x, v: c.v, t_v: c.t_v, a: c.a, t_a: c.t_a }),
            },
            lanes: LaneGeometry {
                sample_x: self.lanes.sample_x,
                center_y: self.lanes.center_y,
                half_width: self.lanes.half_width,
                left_y: self.lanes.left_y,
                right_y: self.lanes.right_y,
            },
            ego: trajectory(&self.ego),
            co: self.co.as_deref().map(trajectory),
            metrics: EvaluationMetrics {
                a_min: self.metrics.a_min,
                p_lat_max: self.metrics.p_lat_max,
                d_min: self.metrics.d_min,
            },
        })
    }
}

/// One JSON line (without the newline) for a record.
pub fn record_to_line(record: &SceneRecord) -> String {
    json::to_line(&RecordDto::from(record)).expect("scene records always serialize")
}

/// Writes records as JSON Lines, replacing any existing file.
pub fn write_scenes(records: &[SceneRecord], path: &Path) -> Result<usize, DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        out.write_all(record_to_line(r).as_bytes()).map_err(io)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(records.len())
}

/// Reads and validates a scene file. Errors name the 1-based line.
pub fn read_scenes(path: &Path) -> Result<Vec<SceneRecord>, DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        out.push(parse_line(&line, path, i + 1)?);
    }
    Ok(out)
}

fn parse_line(line: &str, path: &Path, number: usize) -> Result<SceneRecord, DatasetError> {
    let malformed = |message: String| DatasetError::Malformed {
        path: path.to_path_buf(),
        line: number,
        message,
    };
    let probe: VersionProbe = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(DatasetError::Version {
            path: path.to_path_buf(),
            line: number,
            found: probe.schema_version,
        });
    }
    let dto: RecordDto = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let record = dto.into_record().map_err(malformed)?;
    let problems = validate(&record);
    if !problems.is_empty() {
        return Err(DatasetError::Invalid {
            path: path.to_path_buf(),
            line: number,
            problems,
        });
    }
    Ok(record)
}

/// File name of a kind's scene file inside a data directory.
pub fn scene_file(dir: &Path, kind: ScenarioKind) -> PathBuf {
    dir.join(format!("{}.jsonl", kind.as_str()))
}

/// Requested training records per kind plus the selection seed of each kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSpec {
    pub n_acc: usize,
    pub n_lk: usize,
    pub n_acc_lk: usize,
    #[serde(default)]
    pub seeds: [u64; 3],
}

impl MixSpec {
    pub fn new(n_acc: usize, n_lk: usize, n_acc_lk: usize) -> Self {
        Self {
            n_acc,
            n_lk,
            n_acc_lk,
            seeds: [0; 3],
        }
    }

    pub fn count(&self, kind: ScenarioKind) -> usize {
        [self.n_acc, self.n_lk, self.n_acc_lk][kind.ordinal()]
    }

    pub fn total(&self) -> usize {
        self.n_acc + self.n_lk + self.n_acc_lk
    }

    /// The ten mixes of the reference ADE table, in row order.
    pub fn table_rows() -> Vec<MixSpec> {
        [
            (2000, 0, 0),
            (0, 2000, 0),
            (0, 0, 2000),
            (2000, 2000, 0),
            (0, 2000, 2000),
            (0, 3000, 3000),
            (2000, 0, 2000),
            (2000, 2000, 2000),
            (2000, 2000, 200),
            (0, 0, 200),
        ]
        .into_iter()
        .map(|(a, l, al)| MixSpec::new(a, l, al))
        .collect()
    }
}

/// Training pool of a mix and the fixed test pool of every kind.
#[derive(Debug, Clone)]
pub struct MixPools {
    pub train: Vec<SceneRecord>,
    /// Indexed by [`ScenarioKind::ordinal`].
    pub test: [Vec<SceneRecord>; 3],
}

/// Builds a mix from one source per kind (indexed by ordinal).
///
/// The last `test_size` records of each source form that kind's test pool.
/// Training records are drawn from the remaining records by a shuffle keyed on
/// the kind's mix seed, so pools never overlap and a larger request extends a
/// smaller one with the same seed.
pub fn assemble_mix(spec: &MixSpec, sources: [&[SceneRecord]; 3], test_size: usize) -> Result<MixPools, DatasetError> {
    if spec.total() == 0 {
        return Err(DatasetError::EmptyMix);
    }
    let mut train = Vec::with_capacity(spec.total());
    let mut test: [Vec<SceneRecord>; 3] = Default::default();
    for kind in ScenarioKind::ALL {
        let source = sources[kind.ordinal()];
        let requested = spec.count(kind);
        if let Some(r) = source.iter().find(|r| r.scenario.kind != kind) {
            return Err(DatasetError::WrongKind { kind, found: r.scenario.kind });
        }
        if source.len() < requested + test_size {
            return Err(DatasetError::Insufficient {
                kind,
                requested,
                test: test_size,
                needed: requested + test_size,
                available: source.len(),
            });
        }
        let (candidates, held_out) = source.split_at(source.len() - test_size);
        test[kind.ordinal()] = held_out.to_vec();
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        shuffle(
            &mut order,
            &mut Substream::new(spec.seeds[kind.ordinal()], kind.ordinal() as u64, Purpose::Selection),
        );
        train.extend(order[..requested].iter().map(|&i| candidates[i].clone()));
    }
    Ok(MixPools { train, test })
}
