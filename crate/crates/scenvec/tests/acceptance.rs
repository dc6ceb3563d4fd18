//! Acceptance criteria, run in order with one `[PASS]`/`[FAIL]` line each.
//! The process exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use scenvec::config::ExperimentConfig;
use scenvec::dataset::MixSpec;
use scenvec::experiment::{baseline_pools, generate_kind, run_baseline, run_mix, MixRun};
use scenvec::report::{self, AdeRow, MaeRow};
use scenvec_core::metamodel::TreeParams;
use scenvec_core::predictor::{grad_check, ModelConfig, PredictorModel, GRADCHECK_SEED};
use scenvec_core::rng::FixedQuantile;
use scenvec_core::sampler::{draw_concrete, sample_lane_geometry, sample_scene, SamplerConfig};
use scenvec_core::scenario::CoParams;
use scenvec_core::simulator::{simulate, SimParams};
use scenvec_core::vectorizer::{feature_matrix, vectorize, VectorizedScene};
use scenvec_core::{SceneRecord, ScenarioKind, Trajectory};

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = f();
    let v = Verdict {
        id,
        name,
        pass,
        detail,
        elapsed: start.elapsed(),
    };
    println!(
        "[{}] {:>2} {}: {} ({:.1} s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.id,
        v.name,
        v.detail,
        v.elapsed.as_secs_f64()
    );
    v
}

struct Sources {
    records: Vec<Vec<SceneRecord>>,
    test_size: usize,
}

impl Sources {
    fn slices(&self) -> [&[SceneRecord]; 3] {
        [&self.records[0][..], &self.records[1][..], &self.records[2][..]]
    }
}

fn feature_counts(sources: &Sources) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest = Duration::ZERO;
    for (kind, (vectors, features)) in ScenarioKind::ALL.into_iter().zip([(74, 518), (49, 343), (74, 518)]) {
        let mut seen = std::collections::BTreeSet::new();
        for r in &sources.records[kind.ordinal()] {
            let start = Instant::now();
            let scene = vectorize(r);
            let flat = feature_matrix(&scene).unwrap().flatten().len();
            slowest = slowest.max(start.elapsed());
            seen.insert((scene.vector_count(), flat));
        }
        pass &= seen.len() == 1 && seen.contains(&(vectors, features));
        parts.push(format!("{kind} {seen:?} over {} scenes", sources.records[kind.ordinal()].len()));
    }
    pass &= slowest < Duration::from_millis(10);
    (pass, format!("{}; slowest scene {:.3} ms", parts.join(", "), slowest.as_secs_f64() * 1e3))
}

fn closed_form() -> (bool, String) {
    let start = Instant::now();
    let mut s = draw_concrete(ScenarioKind::Acc, 0, 0, &mut FixedQuantile(0.5));
    s.v_ego = 10.0;
    // The Co holds 10 m/s past the 5 s horizon. Quantile 0.5 makes every
    // symmetric noise draw exactly zero.
    s.co = Some(CoParams { x: -30.0, v: 10.0, t_v: 10.0, a: -1.0, t_a: 1.0 });
    let lanes = sample_lane_geometry(&s, &mut FixedQuantile(0.5));
    let r = simulate(&s, lanes, &mut FixedQuantile(0.5), &SimParams::default());
    let elapsed = start.elapsed();
    let a_min = r.metrics.a_min;
    let d_min = r.metrics.d_min.unwrap_or(f64::NAN);
    let pass = a_min.abs() <= 1e-9 && (d_min - 20.0).abs() <= 1e-6 && elapsed < Duration::from_secs(1);
    (pass, format!("a_min {a_min:e} m/s², d_min {d_min:.12} m"))
}

fn gradient_check(sources: &Sources) -> (bool, String) {
    let start = Instant::now();
    let config = ModelConfig { hidden_dim: 4, init_seed: GRADCHECK_SEED, ..ModelConfig::default() };
    let model = PredictorModel::<f64>::new(&config).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for kind in ScenarioKind::ALL {
        let scene = vectorize(&sources.records[kind.ordinal()][0]);
        let r = grad_check(&model, &scene, &config).unwrap();
        worst = worst.max(r.max_relative_error);
        checked = r.parameters_checked;
    }
    let pass = worst <= 1e-4 && start.elapsed() < Duration::from_secs(10);
    (pass, format!("max relative error {worst:.3e} over {checked} parameters, one scene per kind"))
}

fn max_abs_diff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| [(p[0] - q[0]).abs(), (p[1] - q[1]).abs()])
        .fold(0.0, f64::max)
}

fn invariances(sources: &Sources) -> (bool, String) {
    let start = Instant::now();
    let model = PredictorModel::<f64>::new(&ModelConfig { init_seed: 3, ..ModelConfig::default() }).unwrap();
    let (mut perm, mut dup) = (0.0f64, 0.0f64);
    for records in &sources.records {
        for r in records.iter().take(10) {
            let scene = vectorize(r);
            let base = model.forward(&scene).unwrap();

            let mut reversed = scene.clone();
            let ego = reversed.ego_index().unwrap();
            let ego_line = reversed.polylines.remove(ego);
            reversed.polylines.reverse();
            reversed.polylines.insert(reversed.polylines.len() / 2, ego_line);
            perm = perm.max(max_abs_diff(&base, &model.forward(&reversed).unwrap()));

            let mut doubled: VectorizedScene = scene.clone();
            for p in &mut doubled.polylines {
                let k = p.vectors.len() / 2;
                let copy = p.vectors[k];
                p.vectors.insert(k, copy);
            }
            dup = dup.max(max_abs_diff(&base, &model.forward(&doubled).unwrap()));
        }
    }
    let pass = perm <= 1e-6 && dup <= 1e-6 && start.elapsed() < Duration::from_secs(10);
    (pass, format!("max output change: permutation {perm:.2e} m, duplication {dup:.2e} m over 30 scenes"))
}

/// Straight scans over the logged states, written without the metrics module.
fn scan_metrics(ego: &Trajectory, co: Option<&Trajectory>) -> (f64, f64, Option<f64>) {
    let mut a_min = f64::INFINITY;
    for k in 0..ego.states.len() - 1 {
        let a = (ego.states[k + 1].speed - ego.states[k].speed) / 0.2;
        if a < a_min {
            a_min = a;
        }
    }
    let mut p_lat_max = 0.0;
    for s in &ego.states {
        if s.y.abs() > p_lat_max {
            p_lat_max = s.y.abs();
        }
    }
    let d_min = co.map(|co| {
        let mut best = f64::INFINITY;
        for k in 0..ego.states.len() {
            let dx = ego.states[k].x - co.states[k].x;
            let dy = ego.states[k].y - co.states[k].y;
            let d = (dx * dx + dy * dy).sqrt();
            if d < best {
                best = d;
            }
        }
        best
    });
    (a_min, p_lat_max, d_min)
}

fn metric_oracle() -> (bool, String) {
    let start = Instant::now();
    let sim = SimParams::default();
    let mut mismatches = 0;
    for i in 0..100u64 {
        let kind = ScenarioKind::ALL[(i % 3) as usize];
        let cfg = SamplerConfig::new(kind, 4242, 100).unwrap();
        let r = sample_scene(&cfg, i, &sim).unwrap();
        let module = scenvec_core::metrics::evaluate(&r.ego, r.co.as_ref()).unwrap();
        let (a_min, p_lat_max, d_min) = scan_metrics(&r.ego, r.co.as_ref());
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        let ok = same(module.a_min, a_min)
            && same(module.p_lat_max, p_lat_max)
            && module.d_min.map(f64::to_bits) == d_min.map(f64::to_bits)
            && module == r.metrics;
        mismatches += usize::from(!ok);
    }
    let pass = mismatches == 0 && start.elapsed() < Duration::from_secs(60);
    (pass, format!("{mismatches} of 100 scenes differ bitwise from the scan"))
}

fn single_kind(run: &Result<MixRun<f64>, String>) -> (bool, String) {
    match run {
        Ok(run) => {
            let [acc, lk, acc_lk] = &run.evaluations;
            let pass = acc.ade <= 1.0 && run.wall_time_s <= 1800.0;
            (
                pass,
                format!(
                    "ADE_ACC {:.3} m (LK {:.2} m, ACC&LK {:.2} m), train/val/test {}/{}/{}, best epoch {}, {:.0} s",
                    acc.ade, lk.ade, acc_lk.ade, run.train_size, run.val_size, acc.records, run.best_epoch, run.wall_time_s
                ),
            )
        }
        Err(e) => (false, e.clone()),
    }
}

fn degradation(run: &Result<MixRun<f64>, String>) -> (bool, String) {
    match run {
        Ok(run) => {
            let (acc, lk) = (run.evaluations[0].ade, run.evaluations[1].ade);
            (lk >= 5.0 * acc, format!("ADE_LK / ADE_ACC = {lk:.2} / {acc:.3} = {:.1}", lk / acc))
        }
        Err(e) => (false, e.clone()),
    }
}

fn median3(mut v: [f64; 3]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[1]
}

fn mixing_benefit(sources: &Sources, defaults: &ExperimentConfig) -> (bool, String) {
    let start = Instant::now();
    let rich = defaults.mix(9).copied().unwrap();
    let lean = defaults.mix(10).copied().unwrap();
    if (rich.n_acc, rich.n_lk, rich.n_acc_lk) != (2000, 2000, 200) || (lean.n_acc, lean.n_lk, lean.n_acc_lk) != (0, 0, 200) {
        return (false, "default rows 9 and 10 are not the expected mixes".into());
    }
    let mut ade = [[0.0; 3]; 2];
    for (m, spec) in [rich, lean].iter().enumerate() {
        for seed in 0..3u64 {
            let spec = MixSpec { seeds: [seed; 3], ..*spec };
            let config = ModelConfig { init_seed: seed, ..defaults.model_config() };
            match run_mix::<f64>(&spec, sources.slices(), sources.test_size, &config) {
                Ok(run) => ade[m][seed as usize] = run.evaluations[2].ade,
                Err(e) => return (false, format!("seed {seed}: {e}")),
            }
        }
    }
    let (a, b) = (median3(ade[0]), median3(ade[1]));
    let pass = a < b && start.elapsed() < Duration::from_secs(7200);
    (
        pass,
        format!("median ADE_ACC&LK {a:.3} m (2000,2000,200) vs {b:.3} m (0,0,200); per seed {:?} vs {:?}", round(ade[0]), round(ade[1])),
    )
}

fn round(v: [f64; 3]) -> [f64; 3] {
    v.map(|x| (x * 1000.0).round() / 1000.0)
}

fn tree_baseline(sources: &Sources, run: &Result<MixRun<f64>, String>) -> (bool, String) {
    let kind = ScenarioKind::Acc;
    let params = TreeParams::default();
    let (train, test) = baseline_pools(kind, sources.slices(), 2000, sources.test_size, 0).unwrap();
    let b = run_baseline(kind, &train, &test, &params).unwrap();
    let predictor = run.as_ref().ok().map(|r| AdeRow::from_run("1", r));
    let rows = MaeRow::from_baseline(&b, params.seed, |m| predictor.as_ref().and_then(|r| r.mae(kind, m)));
    print!("{}", report::mae_table(&rows));
    let pass = b.metrics.iter().all(|m| m.mae_tree <= 0.5 * m.mae_mean);
    let parts: Vec<String> = b
        .metrics
        .iter()
        .map(|m| format!("{} {:.3}/{:.3} = {:.2}", m.metric, m.mae_tree, m.mae_mean, m.mae_tree / m.mae_mean))
        .collect();
    (pass, format!("tree/mean MAE: {}; {}/{} rows", parts.join(", "), b.train_size, b.test_size))
}

fn scenvec(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scenvec"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("scenvec {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<u64, String> {
    let mut bytes = 0;
    for name in names {
        let x = std::fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs"));
        }
        bytes += x.len() as u64;
    }
    Ok(bytes)
}

fn determinism() -> (bool, String) {
    let check = || -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for out in [&a, &b] {
            scenvec(&["generate", "--out", out.to_str().unwrap()])?;
        }
        let files = ["ACC.jsonl", "LK.jsonl", "ACC_AND_LK.jsonl"];
        let bytes = same_files(&a.join("data"), &b.join("data"), &files)?;

        let config = dir.path().join("small.json");
        std::fs::write(
            &config,
            r#"{"generation": {"counts": {"acc": 150, "lk": 150, "acc_lk": 150}},
                "model": {"hidden_dim": 12, "epochs": 3},
                "mixes": [{"n_acc": 40, "n_lk": 40, "n_acc_lk": 40}],
                "test_size": 50}"#,
        )
        .map_err(|e| e.to_string())?;
        let mut rows = Vec::new();
        for out in [dir.path().join("c"), dir.path().join("d")] {
            let args = ["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
            scenvec(&[&args[..], &["generate"]].concat())?;
            scenvec(&[&args[..], &["train", "--mix", "1"]].concat())?;
            let row: Vec<AdeRow> = report::read_rows(&out.join("runs/row-1-seed-0/row.csv")).map_err(|e| e.to_string())?;
            rows.push(row[0].deterministic_part());
        }
        if rows[0] != rows[1] {
            return Err(format!("report values differ: {:?} vs {:?}", rows[0], rows[1]));
        }
        let run = |d: &str| dir.path().join(d).join("runs/row-1-seed-0");
        same_files(&run("c"), &run("d"), &["checkpoint.json"])?;
        Ok(format!(
            "generated files identical ({:.1} MB); train reports identical (ADE_ACC {:.6} m), checkpoints identical",
            bytes as f64 / 1e6,
            rows[0].ade_acc
        ))
    };
    match check() {
        Ok(s) => (true, s),
        Err(e) => (false, e),
    }
}

fn main() {
    let defaults = ExperimentConfig::default();
    let sim = defaults.sim_params();
    let records = ScenarioKind::ALL
        .iter()
        .map(|&k| generate_kind(k, defaults.generation.seeds.get(k), defaults.generation.counts.get(k), &sim).unwrap())
        .collect();
    let sources = Sources {
        records,
        test_size: defaults.test_size,
    };

    let mut verdicts = vec![
        timed(1, "feature counts", || feature_counts(&sources)),
        timed(2, "simulator closed form", closed_form),
        timed(3, "gradient check", || gradient_check(&sources)),
        timed(4, "structural invariances", || invariances(&sources)),
        timed(8, "metric oracle", metric_oracle),
    ];

    let row1 = defaults.mix(1).copied().unwrap();
    let mut run = Err(String::from("not run"));
    verdicts.push(timed(5, "single-scenario training", || {
        run = run_mix::<f64>(&row1, sources.slices(), sources.test_size, &defaults.model_config()).map_err(|e| e.to_string());
        single_kind(&run)
    }));
    verdicts.push(timed(6, "cross-scenario degradation", || degradation(&run)));
    verdicts.push(timed(9, "tree baseline", || tree_baseline(&sources, &run)));
    verdicts.push(timed(10, "determinism", determinism));
    verdicts.push(timed(7, "mixing benefit", || mixing_benefit(&sources, &defaults)));

    verdicts.sort_by_key(|v| v.id);
    println!("\nsummary:");
    for v in &verdicts {
        println!("[{}] {:>2} {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.name);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
