use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use vpc_core::datagen::{generate, stratified_split, write_dataset_files, Dataset, GenSpec};
use vpc_core::experiment::{
    resolve_circuit, run_experiment, run_on_dataset, write_json, ExperimentConfig, ExperimentKind, Model, RunRecord,
};
use vpc_core::train::{random_grad_check, Encoded, OptimizerKind, Task};
use vpc_core::VpcError;

use crate::settings::Settings;

type Result<T> = std::result::Result<T, VpcError>;

/// What a finished command reports back to `main`.
pub enum Outcome {
    Done,
    ToleranceExceeded { max_rel_err: f64, tol: f64 },
}

fn gen_spec(s: &Settings, mut g: GenSpec) -> Result<GenSpec> {
    if let Some(v) = s.get("channels")? {
        g.n_channels = v;
    }
    if let Some(v) = s.get("classes")? {
        g.n_classes = v;
    }
    if let Some(v) = s.get("samples")? {
        g.samples_per_class = v;
    }
    if let Some(v) = s.get("sigma")? {
        g.noise_sigma = v;
    }
    if let Some(v) = s.get("amplitude")? {
        g.amplitude = v;
    }
    if let Some(v) = s.get("seed")? {
        g.seed = v;
    }
    g.validate()?;
    Ok(g)
}

pub fn experiment_config(s: &Settings, forced: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let kind = match forced {
        Some(k) => k,
        None => s.get("experiment")?.unwrap_or(ExperimentKind::Multiclass),
    };
    let mut c = ExperimentConfig::preset(kind);
    c.generator = gen_spec(s, c.generator.clone())?;
    if let Some(v) = s.get("train-frac")? {
        c.split.train_frac = v;
    }
    if let Some(v) = s.get("val-frac")? {
        c.split.val_frac = v;
    }
    if let Some(v) = s.get("test-frac")? {
        c.split.test_frac = v;
    }
    let t = &mut c.train;
    if let Some(v) = s.get("epochs")? {
        t.epochs = v;
    }
    if let Some(v) = s.get("lr")? {
        t.learning_rate = v;
    }
    if let Some(v) = s.get::<OptimizerKind>("optimizer")? {
        t.optimizer = v;
    }
    if let Some(b) = s.raw("batch") {
        t.batch_size = match b {
            "full" => None,
            n => Some(s.get::<usize>("batch")?.ok_or_else(|| VpcError::Config(format!("bad batch `{n}`")))?),
        };
    }
    if let Some(v) = s.get("max-evals")? {
        t.max_evals = v;
    }
    if let Some(v) = s.get_bool("kink-guard")? {
        t.kink_guard = v;
    }
    if let Some(v) = s.get("circuit")? {
        c.circuit = v;
    }
    if let Some(v) = s.get("blocks")? {
        c.blocks = v;
    }
    if let Some(v) = s.get("hidden")? {
        c.mlp_hidden = v;
    }
    let first: u64 = s.get("seed")?.unwrap_or(0);
    let count: u64 = s.get("seeds")?.unwrap_or(1);
    if count == 0 {
        return Err(VpcError::Config("seeds must be at least 1".into()));
    }
    c.seeds = (first..first + count).collect();
    let c = ExperimentConfig {
        seeds: c.seeds.clone(),
        ..c.for_seed(first)
    };
    c.validate()?;
    Ok(c)
}

fn out_dir(s: &Settings, default: &str) -> PathBuf {
    s.path("out").unwrap_or_else(|| PathBuf::from(default))
}

fn echo(dir: &Path, command: &str, s: &Settings, resolved: serde_json::Value) -> Result<()> {
    write_json(
        &dir.join("config.json"),
        &json!({ "command": command, "settings": s.entries(), "resolved": resolved }),
    )
}

pub fn generate_cmd(s: &Settings) -> Result<Outcome> {
    let spec = gen_spec(s, GenSpec::default())?;
    let dir = out_dir(s, "data");
    echo(&dir, "generate", s, json!(spec))?;
    let data = generate(&spec)?;
    let csv = dir.join("dataset.csv");
    write_dataset_files(&data, &spec, &csv)?;
    println!("wrote {} ({} rows)", csv.display(), data.len());
    println!("dataset hash {}", data.hash());
    Ok(Outcome::Done)
}

fn print_runs(runs: &[RunRecord]) {
    for r in runs {
        let rep = &r.report;
        let mut line = format!(
            "{} seed {}: test accuracy {:.4}, val accuracy {:.4}, train loss {:.4} -> {:.4}, {} params, {}",
            r.arm,
            r.seed,
            r.test_accuracy,
            rep.val_accuracy,
            rep.initial_train_loss,
            rep.final_train_loss,
            rep.param_count,
            rep.optimizer
        );
        if let Some(n) = rep.evaluations {
            line.push_str(&format!(", {n} evaluations"));
            if rep.budget_exhausted == Some(true) {
                line.push_str(" (budget exhausted)");
            }
        }
        println!("{line}");
    }
}

pub fn train_cmd(s: &Settings) -> Result<Outcome> {
    let mut cfg = experiment_config(s, None)?;
    let dir = out_dir(s, &format!("runs/{}", cfg.experiment));
    match s.path("data") {
        None => {
            let outcome = run_experiment(&cfg, Some(&dir))?;
            print_runs(&outcome.runs);
            if let Some(a) = &outcome.ablation {
                println!(
                    "median test accuracy: deep-circuit {:.4}, deep-stack {:.4}",
                    a.median_deep_circuit, a.median_deep_stack
                );
            }
        }
        Some(path) => {
            let data = Dataset::read_csv(&path, None)?;
            cfg.generator.n_channels = data.n_channels();
            cfg.generator.n_classes = data.n_classes();
            cfg.seeds.truncate(1);
            cfg.validate()?;
            echo(&dir, "train", s, json!({ "experiment": cfg, "data": path }))?;
            let runs = run_on_dataset(&cfg, &data, Some(&dir))?;
            print_runs(&runs);
        }
    }
    println!("outputs in {}", dir.display());
    Ok(Outcome::Done)
}

pub fn evaluate_cmd(s: &Settings) -> Result<Outcome> {
    let run = s
        .path("run")
        .ok_or_else(|| VpcError::Config("evaluate needs --run DIR (or a report.json path)".into()))?;
    let report_path = if run.is_dir() { run.join("report.json") } else { run.clone() };
    let text = fs::read_to_string(&report_path).map_err(|e| VpcError::io(&report_path, e))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| VpcError::Parse {
        path: report_path.clone(),
        msg: e.to_string(),
    })?;
    let model: Model = record.report.model.parse()?;
    let split_name = s.raw("split").unwrap_or("test").to_string();
    let dir = s.path("out").unwrap_or_else(|| {
        report_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("evaluation-{split_name}"))
    });

    let (data, source) = match s.path("data") {
        Some(p) => (Dataset::read_csv(&p, None)?, p.display().to_string()),
        None => {
            let full = generate(&record.config.generator)?;
            if full.hash() != record.dataset_hash {
                log::warn!("regenerated data does not match the hash recorded in the report");
            }
            let split = stratified_split(&full, &record.config.split)?;
            let part = match split_name.as_str() {
                "train" => split.train,
                "val" => split.val,
                "test" => split.test,
                "all" => full,
                other => return Err(VpcError::Config(format!("unknown split `{other}`"))),
            };
            (part, format!("regenerated, {split_name} split"))
        }
    };
    echo(
        &dir,
        "evaluate",
        s,
        json!({ "report": report_path, "model": record.report.model, "data": source }),
    )?;
    let encoded = Encoded::from_dataset(&data)?;
    let ev = model.evaluate(&record.report.final_params, &encoded)?;
    write_json(
        &dir.join("evaluation.json"),
        &json!({
            "model": record.report.model,
            "data": source,
            "dataset_hash": data.hash(),
            "samples": data.len(),
            "accuracy": ev.accuracy,
            "mean_loss": ev.mean_loss,
            "degenerate": ev.degenerate,
            "confusion": ev.confusion,
        }),
    )?;
    let cm = dir.join("confusion.csv");
    fs::write(&cm, ev.confusion.to_csv()).map_err(|e| VpcError::io(&cm, e))?;
    println!("accuracy {:.4} on {} samples ({})", ev.accuracy, data.len(), source);
    Ok(Outcome::Done)
}

pub fn gradcheck_cmd(s: &Settings) -> Result<Outcome> {
    let circuit = s.raw("circuit").unwrap_or("single-stack").to_string();
    let channels: usize = s.get("channels")?.unwrap_or(4);
    let classes: usize = s.get("classes")?.unwrap_or(4);
    let blocks: usize = s.get("blocks")?.unwrap_or(2);
    let seed: u64 = s.get("seed")?.unwrap_or(0);
    let tol: f64 = s.get("tol")?.unwrap_or(1e-5);
    let fd_step: f64 = s.get("fd-step")?.unwrap_or(1e-5);
    let kink_guard = s.get_bool("kink-guard")?.unwrap_or(true);
    if classes < 2 {
        return Err(VpcError::Config("classes must be at least 2".into()));
    }
    if !(tol >= 0.0) {
        return Err(VpcError::Config("tol must be >= 0".into()));
    }
    let spec = resolve_circuit(&circuit, channels, blocks)?;
    let task = Task::for_classes(classes);
    let resolved = json!({
        "circuit": spec.to_string(), "task": task, "seed": seed, "tol": tol,
        "fd_step": fd_step, "kink_guard": kink_guard,
    });
    let out = s.path("out");
    if let Some(dir) = &out {
        echo(dir, "gradcheck", s, resolved)?;
    }
    let run = random_grad_check(&spec, task, seed, fd_step, kink_guard)?;
    if let Some(dir) = &out {
        write_json(&dir.join("gradcheck.json"), &run)?;
    }
    let err = run.report.max_rel_err;
    println!(
        "max_rel_err {err:e} over {} parameters (tol {tol:e})",
        run.report.analytic.len()
    );
    if err > tol {
        Ok(Outcome::ToleranceExceeded { max_rel_err: err, tol })
    } else {
        Ok(Outcome::Done)
    }
}

pub fn benchmark_cmd(s: &Settings) -> Result<Outcome> {
    let cfg = experiment_config(s, Some(ExperimentKind::Benchmark))?;
    let dir = out_dir(s, "runs/benchmark");
    let outcome = run_experiment(&cfg, Some(&dir))?;
    let rows = outcome.benchmark.expect("benchmark rows");
    print!("{}", vpc_core::experiment::benchmark_table(&rows, cfg.seeds.len() > 1));
    println!("outputs in {}", dir.display());
    Ok(Outcome::Done)
}
