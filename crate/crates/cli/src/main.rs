mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vpc_core::VpcError;

use commands::Outcome;
use settings::Settings;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_TOLERANCE: u8 = 5;

/// Variational phasor circuits: generate data, train, evaluate, check
/// gradients and benchmark.
#[derive(Parser)]
#[command(name = "vpc", version)]
struct Cli {
    /// More logging (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (CSV + JSON spec).
    Generate(Flags),
    /// Run an experiment: binary, multiclass, deep_ablation or benchmark.
    Train(Flags),
    /// Re-evaluate a trained run on regenerated or external data.
    Evaluate(Flags),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(Flags),
    /// Single-stack vs deep-stack vs MLP comparison table.
    Benchmark(Flags),
}

/// Every flag can also be set as `key = value` in the `--config` file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// Samples per class.
    #[arg(long)]
    samples: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// single-stack, deep-circuit, deep-stack, or a layer list such as
    /// "threads=8 shift mix-even mix-odd normalize".
    #[arg(long)]
    circuit: Option<String>,
    /// Blocks for the deep families.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// adam or derivative_free.
    #[arg(long)]
    optimizer: Option<String>,
    /// `full` or a mini-batch size.
    #[arg(long)]
    batch: Option<String>,
    /// Evaluation budget for the derivative-free solver.
    #[arg(long = "max-evals")]
    max_evals: Option<usize>,
    /// MLP hidden width for the benchmark.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long = "train-frac")]
    train_frac: Option<f64>,
    #[arg(long = "val-frac")]
    val_frac: Option<f64>,
    #[arg(long = "test-frac")]
    test_frac: Option<f64>,
    #[arg(long = "kink-guard")]
    kink_guard: Option<bool>,
    /// Dataset CSV to use instead of generating one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory or report.json to evaluate.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Split to evaluate on: train, val, test or all.
    #[arg(long)]
    split: Option<String>,
    /// Gradient-check tolerance on the max relative error.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
}

impl Flags {
    fn settings(&self) -> Result<Settings, VpcError> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        s.set("out", path(&self.out));
        s.set("seed", self.seed);
        s.set("seeds", self.seeds);
        s.set("experiment", self.experiment.clone());
        s.set("channels", self.channels);
        s.set("classes", self.classes);
        s.set("samples", self.samples);
        s.set("sigma", self.sigma);
        s.set("amplitude", self.amplitude);
        s.set("circuit", self.circuit.clone());
        s.set("blocks", self.blocks);
        s.set("epochs", self.epochs);
        s.set("lr", self.lr);
        s.set("optimizer", self.optimizer.clone());
        s.set("batch", self.batch.clone());
        s.set("max-evals", self.max_evals);
        s.set("hidden", self.hidden);
        s.set("train-frac", self.train_frac);
        s.set("val-frac", self.val_frac);
        s.set("test-frac", self.test_frac);
        s.set("kink-guard", self.kink_guard);
        s.set("data", path(&self.data));
        s.set("run", path(&self.run));
        s.set("split", self.split.clone());
        s.set("tol", self.tol);
        s.set("fd-step", self.fd_step);
        Ok(s)
    }
}

fn exit_code(e: &VpcError) -> u8 {
    match e {
        VpcError::Config(_) | VpcError::InvalidSplit(_) | VpcError::InvalidInput(_) | VpcError::Dimension { .. } => {
            EXIT_CONFIG
        }
        VpcError::Io { .. } | VpcError::Parse { .. } => EXIT_IO,
        VpcError::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (flags, run): (&Flags, fn(&Settings) -> Result<Outcome, VpcError>) = match &cli.command {
        Command::Generate(f) => (f, commands::generate_cmd),
        Command::Train(f) => (f, commands::train_cmd),
        Command::Evaluate(f) => (f, commands::evaluate_cmd),
        Command::Gradcheck(f) => (f, commands::gradcheck_cmd),
        Command::Benchmark(f) => (f, commands::benchmark_cmd),
    };
    match flags.settings().and_then(|s| run(&s)) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ToleranceExceeded { max_rel_err, tol }) => {
            eprintln!("error: max_rel_err {max_rel_err:e} exceeds tolerance {tol:e}");
            ExitCode::from(EXIT_TOLERANCE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
