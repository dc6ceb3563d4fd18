//! Command-line front end.
//!
//! Layout under the output directory:
//!
//! ```text
//! data/{ACC,LK,ACC_AND_LK}.jsonl        generated scenes
//! runs/row-<mix>-seed-<seed>/           one training run
//!     checkpoint.json  row.csv  row.md  curve.csv  plots/<kind>.svg
//! baseline/mae.csv  baseline/mae.md     tree-ensemble comparison
//! report.md                             consolidated tables
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 failed check.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use scenvec_core::predictor::{grad_check_with, ModelConfig, Precision, PredictorModel, Real, GRADCHECK_SEED};
use scenvec_core::sampler::{sample_scene, SamplerConfig};
use scenvec_core::vectorizer::vectorize;
use scenvec_core::{SceneRecord, ScenarioKind};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::dataset::{read_scenes, scene_file, write_scenes, MixSpec};
use crate::experiment::{baseline_pools, generate_kind, predict_trajectory, run_baseline, run_mix};
use crate::plot::scene_svg;
use crate::report::{self, AdeRow, MaeRow};

/// Largest relative gradient error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "scenvec", version, about = "Scenario embeddings, trajectory prediction and metamodel baselines")]
pub struct Cli {
    /// Experiment config (JSON); flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample, simulate and write the scene files of every kind.
    Generate {
        /// Master seed of ACC; LK and ACC&LK use N+1 and N+2.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Train on one mix and evaluate on every kind's test pool.
    Train {
        /// Mix row (1-based).
        #[arg(long, value_name = "INDEX")]
        mix: usize,
        /// Model init seed and mix selection seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "N")]
        test_size: Option<usize>,
    },
    /// Fit the tree ensemble per kind and compare metric MAEs.
    Baseline {
        /// Tree seed and training-row selection seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "N")]
        test_size: Option<usize>,
    },
    /// Compare analytic and finite-difference gradients of a tiny model.
    Gradcheck {
        /// Init seed of the tiny model.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        precision: Option<PrecisionArg>,
        /// Adds 1.0 to the analytic gradient of this parameter.
        #[arg(long, hide = true, value_name = "INDEX")]
        corrupt_gradient: Option<usize>,
    },
    /// Consolidate row files into Markdown tables.
    Report {
        /// Row files; defaults to every row file under the output directory.
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecisionArg {
    Single,
    Double,
}

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Data(e) => {
                // Many messages already embed their source; print only new causes.
                let mut text = e.to_string();
                for cause in e.chain().skip(1) {
                    let c = cause.to_string();
                    if !text.contains(&c) {
                        text = format!("{text}: {c}");
                    }
                }
                f.write_str(&text)
            }
            Failure::Check(m) => f.write_str(m),
        }
    }
}

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| Failure::Usage(e.into()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    match cli.command {
        Command::Generate { seed } => {
            if let Some(s) = seed {
                config.generation.seeds.acc = s;
                config.generation.seeds.lk = s.wrapping_add(1);
                config.generation.seeds.acc_lk = s.wrapping_add(2);
            }
            generate(&config)
        }
        Command::Train { mix, seed, test_size } => {
            if let Some(n) = test_size {
                config.test_size = n;
            }
            let mut spec = *config
                .mix(mix)
                .ok_or_else(|| Failure::Usage(anyhow!("mix {mix} not in 1..={}", config.mixes.len())))?;
            if let Some(s) = seed {
                config.model.init_seed = s;
                spec.seeds = [s; 3];
            }
            train(&config, mix, &spec)
        }
        Command::Baseline { seed, test_size } => {
            if let Some(n) = test_size {
                config.test_size = n;
            }
            if let Some(s) = seed {
                config.baseline.seed = s;
            }
            baseline(&config)
        }
        Command::Gradcheck {
            seed,
            precision,
            corrupt_gradient,
        } => {
            let mut model = config.model_config();
            model.hidden_dim = 4;
            model.init_seed = seed.unwrap_or(GRADCHECK_SEED);
            if let Some(p) = precision {
                model.precision = match p {
                    PrecisionArg::Single => Precision::Single,
                    PrecisionArg::Double => Precision::Double,
                };
            }
            gradcheck(&config, &model, corrupt_gradient)
        }
        Command::Report { paths } => report_cmd(&config, paths),
    }
}

fn data_dir(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join("data")
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::Data)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Data)
}

fn generate(config: &ExperimentConfig) -> Result<(), Failure> {
    let dir = data_dir(config);
    create_dir(&dir)?;
    let sim = config.sim_params();
    let total = Instant::now();
    for kind in ScenarioKind::ALL {
        let count = config.generation.counts.get(kind);
        if count == 0 {
            eprintln!("warning: {kind}: count 0, no file written");
            continue;
        }
        let start = Instant::now();
        let records = generate_kind(kind, config.generation.seeds.get(kind), count, &sim).map_err(data)?;
        let path = scene_file(&dir, kind);
        let n = write_scenes(&records, &path).map_err(data)?;
        println!("{kind}: {n} scenes -> {} ({:.2} s)", path.display(), start.elapsed().as_secs_f64());
    }
    println!("generation finished in {:.2} s", total.elapsed().as_secs_f64());
    Ok(())
}

fn load_sources(config: &ExperimentConfig) -> Result<Vec<Vec<SceneRecord>>, Failure> {
    let dir = data_dir(config);
    ScenarioKind::ALL
        .iter()
        .map(|&kind| {
            let path = scene_file(&dir, kind);
            read_scenes(&path).map_err(data)
        })
        .collect()
}

fn train(config: &ExperimentConfig, row: usize, spec: &MixSpec) -> Result<(), Failure> {
    let sources = load_sources(config)?;
    let model = config.model_config();
    match model.precision {
        Precision::Double => train_as::<f64>(config, row, spec, &model, &sources),
        Precision::Single => train_as::<f32>(config, row, spec, &model, &sources),
    }
}

fn train_as<T: Real>(
    config: &ExperimentConfig,
    row: usize,
    spec: &MixSpec,
    model: &ModelConfig,
    sources: &[Vec<SceneRecord>],
) -> Result<(), Failure> {
    let src = [&sources[0][..], &sources[1][..], &sources[2][..]];
    let run = run_mix::<T>(spec, src, config.test_size, model).map_err(data)?;
    let dir = config.out_dir.join("runs").join(format!("row-{row}-seed-{}", model.init_seed));
    create_dir(&dir.join("plots"))?;

    Checkpoint::from_model(&run.model).save(&dir.join("checkpoint.json")).map_err(data)?;
    let ade_row = AdeRow::from_run(&row.to_string(), &run);
    report::write_rows(std::slice::from_ref(&ade_row), &dir.join("row.csv")).map_err(data)?;
    let table = report::ade_table(std::slice::from_ref(&ade_row));
    write_text(&dir.join("row.md"), &table)?;
    let mut curve = String::from("epoch,train_loss,val_loss\n");
    for e in &run.curve {
        curve.push_str(&format!("{},{},{}\n", e.epoch, e.train, e.val));
    }
    write_text(&dir.join("curve.csv"), &curve)?;

    // First test scene of each kind, truth against prediction.
    for kind in ScenarioKind::ALL {
        let test = &sources[kind.ordinal()];
        let Some(record) = test.get(test.len() - config.test_size) else {
            continue;
        };
        let predicted = predict_trajectory(&run.model, record).map_err(data)?;
        let title = format!("row {row}, {kind} test scene {}", record.scenario.index);
        write_text(&dir.join("plots").join(format!("{}.svg", kind.as_str())), &scene_svg(record, Some(&predicted), &title))?;
    }
    print!("{table}");
    for e in &run.evaluations {
        let maes: Vec<String> = e
            .mae
            .iter()
            .map(|(m, v)| format!("{m} {v:.3} {}", scenvec_core::EvaluationMetrics::unit(m)))
            .collect();
        println!("{}: ADE {:.3} m; metric MAE: {}", e.kind, e.ade, maes.join(", "));
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

/// Predictor rows trained on `kind` alone, searched under `runs/`.
fn single_kind_rows(config: &ExperimentConfig) -> Vec<AdeRow> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(config.out_dir.join("runs"))
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path().join("row.csv"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .filter_map(|p| report::read_rows::<AdeRow>(p).ok())
        .flatten()
        .filter(|r| r.single_kind().is_some())
        .collect()
}

fn baseline(config: &ExperimentConfig) -> Result<(), Failure> {
    let sources = load_sources(config)?;
    let src = [&sources[0][..], &sources[1][..], &sources[2][..]];
    let params = config.baseline.tree_params();
    let predictor_rows = single_kind_rows(config);
    let mut rows = Vec::new();
    for kind in ScenarioKind::ALL {
        let (train, test) =
            baseline_pools(kind, src, config.baseline.train_size, config.test_size, config.baseline.seed).map_err(data)?;
        let result = run_baseline(kind, &train, &test, &params).map_err(data)?;
        let predictor = predictor_rows
            .iter()
            .find(|r| r.single_kind() == Some(kind) && r.test_size == config.test_size);
        rows.extend(MaeRow::from_baseline(&result, params.seed, |m| predictor.and_then(|r| r.mae(kind, m))));
    }
    let dir = config.out_dir.join("baseline");
    create_dir(&dir)?;
    report::write_rows(&rows, &dir.join("mae.csv")).map_err(data)?;
    let table = report::mae_table(&rows);
    write_text(&dir.join("mae.md"), &table)?;
    print!("{table}");
    Ok(())
}

fn gradcheck(config: &ExperimentConfig, model: &ModelConfig, corrupt: Option<usize>) -> Result<(), Failure> {
    if model.precision != Precision::Double {
        return Err(Failure::Usage(anyhow!("gradcheck requires double precision")));
    }
    let tiny = PredictorModel::<f64>::new(model).map_err(|e| Failure::Usage(e.into()))?;
    let sim = config.sim_params();
    let mut worst = 0.0f64;
    for kind in ScenarioKind::ALL {
        let sampler = SamplerConfig::new(kind, config.generation.seeds.get(kind), 1).map_err(data)?;
        let scene = vectorize(&sample_scene(&sampler, 0, &sim).map_err(data)?);
        let r = grad_check_with(&tiny, &scene, model, corrupt.map(|i| (i, 1.0))).map_err(data)?;
        println!(
            "{kind}: max relative error {:.3e} over {} parameters (worst: {} #{}, analytic {:.6e}, numeric {:.6e})",
            r.max_relative_error, r.parameters_checked, r.worst_block, r.worst_parameter, r.analytic, r.numeric
        );
        worst = worst.max(r.max_relative_error);
    }
    if worst > GRADCHECK_TOLERANCE {
        return Err(Failure::Check(format!("gradient check failed: {worst:.3e} > {GRADCHECK_TOLERANCE:e}")));
    }
    println!("gradient check passed: {worst:.3e} <= {GRADCHECK_TOLERANCE:e}");
    Ok(())
}

fn report_cmd(config: &ExperimentConfig, mut paths: Vec<PathBuf>) -> Result<(), Failure> {
    if paths.is_empty() {
        let runs = config.out_dir.join("runs");
        let mut found: Vec<PathBuf> = std::fs::read_dir(&runs)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path().join("row.csv"))
            .filter(|p| p.is_file())
            .collect();
        found.sort();
        paths = found;
        let mae = config.out_dir.join("baseline").join("mae.csv");
        if mae.is_file() {
            paths.push(mae);
        }
    }
    let collected = report::collect(&paths).map_err(data)?;
    let text = report::markdown(&collected);
    if config.out_dir.is_dir() {
        write_text(&config.out_dir.join("report.md"), &text)?;
    }
    print!("{text}");
    Ok(())
}
