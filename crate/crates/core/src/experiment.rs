//! End-to-end experiment pipelines: generate, split, encode, train, evaluate,
//! and write reports.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.json                       resolved configuration, written first
//! [seed-<s>/][<arm>/]report.json    one RunRecord
//! [seed-<s>/][<arm>/]loss.csv       epoch,train_loss,val_loss
//! [seed-<s>/][<arm>/]confusion.csv  test-set confusion, rows = true class
//! ablation.json                     deep_ablation only
//! benchmark.csv, benchmark.txt      benchmark only
//! ```
//!
//! Seed directories appear only for multi-seed runs and arm directories only
//! for experiments with more than one model.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{generate, stratified_split, Dataset, GenSpec, SplitSpec};
use crate::error::{Result, VpcError};
use crate::phasor::{Builtin, CircuitSpec};
use crate::readout::ConfusionMatrix;
use crate::train::{evaluate, evaluate_mlp, fit, fit_mlp, Encoded, MlpSpec, OptimizerKind, Task, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Binary,
    Multiclass,
    DeepAblation,
    Benchmark,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Binary => "binary",
            ExperimentKind::Multiclass => "multiclass",
            ExperimentKind::DeepAblation => "deep_ablation",
            ExperimentKind::Benchmark => "benchmark",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = VpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "binary" => Ok(Self::Binary),
            "multiclass" => Ok(Self::Multiclass),
            "deep_ablation" | "ablation" => Ok(Self::DeepAblation),
            "benchmark" => Ok(Self::Benchmark),
            other => Err(VpcError::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Fully resolved settings for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub generator: GenSpec,
    pub split: SplitSpec,
    pub train: TrainConfig,
    /// Builtin family name or explicit layer list (`threads=N shift mix-even ...`).
    /// Ignored by deep_ablation and benchmark, which fix their own families.
    pub circuit: String,
    /// Block count for deep families; the deep_ablation and benchmark
    /// deep-stack row use it too.
    pub blocks: usize,
    pub mlp_hidden: usize,
    /// Each seed drives generation, splitting and initialization.
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut generator = GenSpec::default();
        let (circuit, blocks) = match kind {
            ExperimentKind::Binary => {
                generator.n_classes = 2;
                (Builtin::SingleStack, 1)
            }
            ExperimentKind::Multiclass => (Builtin::DeepStack, 2),
            ExperimentKind::DeepAblation | ExperimentKind::Benchmark => (Builtin::DeepStack, 4),
        };
        Self {
            experiment: kind,
            generator,
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            circuit: circuit.name().to_string(),
            blocks,
            mlp_hidden: 64,
            seeds: vec![0],
        }
    }

    /// The experiment's circuit for `n_threads` threads.
    pub fn circuit_spec(&self) -> Result<CircuitSpec> {
        resolve_circuit(&self.circuit, self.generator.n_channels, self.blocks)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(VpcError::Config("at least one seed is required".into()));
        }
        if self.blocks == 0 {
            return Err(VpcError::Config("blocks must be positive".into()));
        }
        if self.mlp_hidden == 0 {
            return Err(VpcError::Config("mlp_hidden must be positive".into()));
        }
        let task = Task::for_classes(self.generator.n_classes);
        for (_, arm) in self.arms()? {
            if let Arm::Circuit(c) = &arm {
                if c.n_threads() != self.generator.n_channels {
                    return Err(VpcError::Config(format!(
                        "circuit has {} threads but the data has {} channels",
                        c.n_threads(),
                        self.generator.n_channels
                    )));
                }
                if task.classes() > c.n_threads() {
                    return Err(VpcError::Config("more classes than circuit threads".into()));
                }
            }
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(VpcError::Config("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Copy with every seed set to `seed`.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.generator.seed = seed;
        c.split.seed = seed;
        c.train.seed = seed;
        c.seeds = vec![seed];
        c
    }

    fn arms(&self) -> Result<Vec<(String, Arm)>> {
        let n = self.generator.n_channels;
        let b = |kind: Builtin, blocks| -> Result<(String, Arm)> {
            Ok((kind.name().to_string(), Arm::Circuit(CircuitSpec::builtin(kind, n, blocks)?)))
        };
        Ok(match self.experiment {
            ExperimentKind::Binary | ExperimentKind::Multiclass => {
                let spec = self.circuit_spec()?;
                let name = self
                    .circuit
                    .parse::<Builtin>()
                    .map(|k| k.name().to_string())
                    .unwrap_or_else(|_| "circuit".to_string());
                vec![(name, Arm::Circuit(spec))]
            }
            ExperimentKind::DeepAblation => {
                vec![b(Builtin::DeepCircuit, self.blocks)?, b(Builtin::DeepStack, self.blocks)?]
            }
            ExperimentKind::Benchmark => {
                let mlp = MlpSpec::new(n, self.mlp_hidden, self.generator.n_classes);
                vec![
                    b(Builtin::SingleStack, 1)?,
                    b(Builtin::DeepStack, self.blocks)?,
                    ("mlp".to_string(), Arm::Mlp(mlp)),
                ]
            }
        })
    }
}

/// Builtin family name or explicit layer list.
pub fn resolve_circuit(text: &str, n_threads: usize, blocks: usize) -> Result<CircuitSpec> {
    match text.parse::<Builtin>() {
        Ok(kind) => CircuitSpec::builtin(kind, n_threads, blocks),
        Err(_) => text
            .parse::<CircuitSpec>()
            .map_err(|e| VpcError::Config(format!("circuit `{text}`: {e}"))),
    }
}

#[derive(Debug, Clone)]
enum Arm {
    Circuit(CircuitSpec),
    Mlp(MlpSpec),
}

/// A trained model recovered from its report's `model` field.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Circuit(CircuitSpec),
    Mlp(MlpSpec),
}

impl FromStr for Model {
    type Err = VpcError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("mlp(").and_then(|r| r.strip_suffix(')')) {
            let dims: Vec<usize> = inner
                .split(',')
                .map(|d| d.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| VpcError::Config(format!("bad mlp shape `{s}`")))?;
            if let [i, h, o] = dims[..] {
                return Ok(Model::Mlp(MlpSpec::new(i, h, o)));
            }
            return Err(VpcError::Config(format!("bad mlp shape `{s}`")));
        }
        Ok(Model::Circuit(s.parse()?))
    }
}

impl Model {
    pub fn evaluate(&self, params: &[f64], data: &Encoded) -> Result<crate::train::Evaluation> {
        match self {
            Model::Circuit(c) => evaluate(c, params, data, Task::for_classes(data.classes)),
            Model::Mlp(m) => evaluate_mlp(m, params, data),
        }
    }
}

/// One trained model on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: ExperimentKind,
    pub arm: String,
    pub seed: u64,
    pub dataset_hash: String,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub test_confusion: ConfusionMatrix,
    pub test_degenerate: usize,
    pub config: ExperimentConfig,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub seed: u64,
    pub dataset_hash: String,
    pub deep_circuit_accuracy: f64,
    pub deep_stack_accuracy: f64,
    pub deep_circuit_params: usize,
    pub deep_stack_params: usize,
    pub deep_circuit_epochs: usize,
    pub deep_stack_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub rows: Vec<AblationRow>,
    pub median_deep_circuit: f64,
    pub median_deep_stack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub optimizer: OptimizerKind,
    pub param_count: usize,
    /// Median test accuracy over seeds.
    pub accuracy: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunRecord>,
    pub ablation: Option<AblationSummary>,
    pub benchmark: Option<Vec<BenchmarkRow>>,
}

impl ExperimentOutcome {
    /// Runs for one arm, in seed order.
    pub fn arm(&self, name: &str) -> Vec<&RunRecord> {
        self.runs.iter().filter(|r| r.arm == name).collect()
    }
}

/// Middle value; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| VpcError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| VpcError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    write(path, &(text + "\n"))
}

fn write_run(dir: &Path, run: &RunRecord) -> Result<()> {
    write_json(&dir.join("report.json"), run)?;
    write(&dir.join("loss.csv"), &run.report.loss_csv())?;
    write(&dir.join("confusion.csv"), &run.test_confusion.to_csv())
}

/// Runs every seed of `cfg`, writing outputs under `out` when given.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if let Some(dir) = out {
        write_json(&dir.join("config.json"), cfg)?;
    }
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let seeded = cfg.for_seed(seed);
        let data = generate(&seeded.generator)?;
        let dir = out.map(|d| seed_dir(d, cfg, seed));
        runs.extend(run_on_dataset(&seeded, &data, dir.as_deref())?);
    }
    finish(cfg, runs, out)
}

fn seed_dir(out: &Path, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    if cfg.seeds.len() > 1 {
        out.join(format!("seed-{seed}"))
    } else {
        out.to_path_buf()
    }
}

/// Splits, trains and evaluates every arm of `cfg` on `data`, using the
/// first seed of `cfg`.
pub fn run_on_dataset(cfg: &ExperimentConfig, data: &Dataset, out: Option<&Path>) -> Result<Vec<RunRecord>> {
    let seed = cfg.seeds[0];
    let cfg = cfg.for_seed(seed);
    let hash = data.hash();
    if data.n_channels() != cfg.generator.n_channels {
        return Err(VpcError::Config(format!(
            "data has {} channels, configuration expects {}",
            data.n_channels(),
            cfg.generator.n_channels
        )));
    }
    let split = stratified_split(data, &cfg.split)?;
    let train = Encoded::from_dataset(&split.train)?;
    let val = Encoded::from_dataset(&split.val)?;
    let test = Encoded::from_dataset(&split.test)?;
    let arms = cfg.arms()?;
    let multi = arms.len() > 1;
    let mut runs = Vec::with_capacity(arms.len());
    for (name, arm) in arms {
        log::info!("{} seed {seed}: training {name}", cfg.experiment);
        let (report, ev) = match &arm {
            Arm::Circuit(c) => {
                let r = fit(c, &cfg.train, &train, &val)?;
                let ev = evaluate(c, &r.final_params, &test, r.task)?;
                (r, ev)
            }
            Arm::Mlp(m) => {
                let r = fit_mlp(m, &cfg.train, &train, &val)?;
                let ev = evaluate_mlp(m, &r.final_params, &test)?;
                (r, ev)
            }
        };
        log::info!(
            "{name}: test accuracy {:.4}, train loss {:.4} -> {:.4}",
            ev.accuracy,
            report.initial_train_loss,
            report.final_train_loss
        );
        let run = RunRecord {
            experiment: cfg.experiment,
            arm: name.clone(),
            seed,
            dataset_hash: hash.clone(),
            test_accuracy: ev.accuracy,
            test_loss: ev.mean_loss,
            test_confusion: ev.confusion,
            test_degenerate: ev.degenerate,
            config: cfg.clone(),
            report,
        };
        if let Some(dir) = out {
            let dir = if multi { dir.join(&name) } else { dir.to_path_buf() };
            write_run(&dir, &run)?;
        }
        runs.push(run);
    }
    Ok(runs)
}

fn finish(cfg: &ExperimentConfig, runs: Vec<RunRecord>, out: Option<&Path>) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome {
        runs,
        ablation: None,
        benchmark: None,
    };
    match cfg.experiment {
        ExperimentKind::DeepAblation => {
            let summary = ablation_summary(&outcome);
            if let Some(dir) = out {
                write_json(&dir.join("ablation.json"), &summary)?;
            }
            outcome.ablation = Some(summary);
        }
        ExperimentKind::Benchmark => {
            let rows = benchmark_rows(&outcome);
            if let Some(dir) = out {
                let multi = cfg.seeds.len() > 1;
                write(&dir.join("benchmark.csv"), &benchmark_csv(&rows, multi))?;
                write(&dir.join("benchmark.txt"), &benchmark_table(&rows, multi))?;
            }
            outcome.benchmark = Some(rows);
        }
        _ => {}
    }
    Ok(outcome)
}

fn ablation_summary(o: &ExperimentOutcome) -> AblationSummary {
    let dc = o.arm(Builtin::DeepCircuit.name());
    let ds = o.arm(Builtin::DeepStack.name());
    let rows: Vec<AblationRow> = dc
        .iter()
        .zip(&ds)
        .map(|(c, s)| AblationRow {
            seed: c.seed,
            dataset_hash: c.dataset_hash.clone(),
            deep_circuit_accuracy: c.test_accuracy,
            deep_stack_accuracy: s.test_accuracy,
            deep_circuit_params: c.report.param_count,
            deep_stack_params: s.report.param_count,
            deep_circuit_epochs: c.report.history.len(),
            deep_stack_epochs: s.report.history.len(),
        })
        .collect();
    let acc = |f: fn(&AblationRow) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
    AblationSummary {
        median_deep_circuit: acc(|r| r.deep_circuit_accuracy),
        median_deep_stack: acc(|r| r.deep_stack_accuracy),
        rows,
    }
}

fn benchmark_rows(o: &ExperimentOutcome) -> Vec<BenchmarkRow> {
    let mut names: Vec<&str> = Vec::new();
    for r in &o.runs {
        if !names.contains(&r.arm.as_str()) {
            names.push(&r.arm);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let runs = o.arm(name);
            let acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
            let first = &runs[0].report;
            BenchmarkRow {
                model: if name == "mlp" { first.model.clone() } else { name.to_string() },
                optimizer: first.optimizer,
                param_count: first.param_count,
                accuracy: median(&acc),
                mean: acc.iter().sum::<f64>() / acc.len() as f64,
                min: acc.iter().copied().fold(f64::INFINITY, f64::min),
                max: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seeds: acc.len(),
            }
        })
        .collect()
}

fn pm(r: &BenchmarkRow) -> String {
    format!("{:.4}±{:.4}", r.mean, (r.max - r.min) / 2.0)
}

pub fn benchmark_csv(rows: &[BenchmarkRow], multi_seed: bool) -> String {
    let mut s = String::from("model,optimizer,param_count,accuracy");
    if multi_seed {
        s.push_str(",accuracy_mean,accuracy_min,accuracy_max,mean_pm_range");
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{}", r.model, r.optimizer, r.param_count, r.accuracy));
        if multi_seed {
            s.push_str(&format!(",{},{},{},{}", r.mean, r.min, r.max, pm(r)));
        }
        s.push('\n');
    }
    s
}

pub fn benchmark_table(rows: &[BenchmarkRow], multi_seed: bool) -> String {
    let mut s = format!("{:<16} {:<16} {:>8} {:>9}", "model", "optimizer", "params", "accuracy");
    if multi_seed {
        s.push_str(&format!(" {:>16}", "mean±range"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{:<16} {:<16} {:>8} {:>8.2}%",
            r.model,
            r.optimizer.to_string(),
            r.param_count,
            100.0 * r.accuracy
        ));
        if multi_seed {
            s.push_str(&format!(" {:>16}", pm(r)));
        }
        s.push('\n');
    }
    s
}
