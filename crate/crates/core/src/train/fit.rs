use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::dfo::{self, DfoOptions};
use super::mlp::MlpSpec;
use crate::autodiff::{value_and_grad, StateLoss};
use crate::datagen::Dataset;
use crate::error::{Result, VpcError};
use crate::phasor::{forward, CircuitSpec, PhasorState};
use crate::readout::{binary_prob, multiclass_logits, predict, predict_binary, softmax, ConfusionMatrix, ReadoutLoss};

/// Half-width of the window around `|phi| = 0` where the `|phi|` logit
/// derivative is zeroed when the kink guard is on.
pub const KINK_TOL: f64 = 1e-9;

/// The simplex solver keeps `n + 1` points and solves `n x n` systems.
pub const DFO_MAX_PARAMS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    DerivativeFree,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::DerivativeFree => "derivative-free",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = VpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "adam" => Ok(Self::Adam),
            "derivative-free" | "cobyla" | "dfo" => Ok(Self::DerivativeFree),
            other => Err(VpcError::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Binary tasks use the thread-0 probability with squared error; multiclass
/// tasks use softmax cross-entropy over the first `classes` threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Task {
    Binary,
    Multiclass { classes: usize },
}

impl Task {
    pub fn for_classes(classes: usize) -> Self {
        if classes == 2 {
            Task::Binary
        } else {
            Task::Multiclass { classes }
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Task::Binary => 2,
            Task::Multiclass { classes } => classes,
        }
    }

    pub fn loss(&self, label: usize, kink_tol: f64) -> ReadoutLoss {
        match *self {
            Task::Binary => ReadoutLoss::BinaryMse { label },
            Task::Multiclass { classes } => ReadoutLoss::CrossEntropy {
                label,
                classes,
                kink_tol,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Initial parameters are uniform in `(-init_scale, init_scale)`.
    pub init_scale: f64,
    pub kink_guard: bool,
    pub max_evals: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            batch_size: None,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            init_scale: 0.1,
            kink_guard: true,
            max_evals: 5000,
            rho_begin: 0.5,
            rho_end: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(VpcError::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(VpcError::Config("learning rate must be positive and finite".into()));
        }
        if self.batch_size == Some(0) {
            return Err(VpcError::Config("batch size must be positive".into()));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(VpcError::Config("init scale must be finite and >= 0".into()));
        }
        if self.max_evals == 0 {
            return Err(VpcError::Config("evaluation budget must be positive".into()));
        }
        if !(self.rho_begin > self.rho_end) || !(self.rho_end > 0.0) {
            return Err(VpcError::Config("need rho_begin > rho_end > 0".into()));
        }
        Ok(())
    }

    fn kink_tol(&self) -> f64 {
        if self.kink_guard {
            KINK_TOL
        } else {
            0.0
        }
    }

    pub fn init_params(&self, n: usize) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        if self.init_scale == 0.0 {
            return vec![0.0; n];
        }
        (0..n).map(|_| rng.gen_range(-self.init_scale..self.init_scale)).collect()
    }
}

/// Encoded samples ready for a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub states: Vec<PhasorState<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Encoded {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let (states, labels) = data.encode()?.into_iter().unzip();
        Ok(Self {
            states,
            labels,
            classes: data.n_classes(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Encoded phases, the MLP input features.
    pub fn phases(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.phases()).collect()
    }
}

fn check_data(spec: &CircuitSpec, data: &Encoded, task: Task) -> Result<()> {
    if data.is_empty() {
        return Err(VpcError::InvalidInput("empty sample set".into()));
    }
    if let Some(s) = data.states.iter().find(|s| s.len() != spec.n_threads()) {
        return Err(VpcError::dim("sample threads", spec.n_threads(), s.len()));
    }
    if task.classes() > spec.n_threads() {
        return Err(VpcError::Config(format!(
            "{} classes need at least as many threads, circuit has {}",
            task.classes(),
            spec.n_threads()
        )));
    }
    Ok(())
}

/// Mean loss and gradient over `idx`. Per-sample work runs in parallel; the
/// reduction is sequential in index order so results do not depend on the
/// thread count.
pub fn batch_value_grad(
    spec: &CircuitSpec,
    params: &[f64],
    data: &Encoded,
    idx: &[usize],
    task: Task,
    kink_tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let per: Vec<Result<(f64, Vec<f64>)>> = idx
        .par_iter()
        .map(|&i| value_and_grad(spec, params, &data.states[i], &task.loss(data.labels[i], kink_tol)))
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for r in per {
        let (l, g) = r?;
        total += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let n = idx.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mean loss over every sample.
pub fn mean_loss(spec: &CircuitSpec, params: &[f64], data: &Encoded, task: Task) -> Result<f64> {
    let per: Vec<Result<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let (out, _) = forward(spec, params, &data.states[i], false)?;
            task.loss(data.labels[i], 0.0).value(&out)
        })
        .collect();
    let mut total = 0.0;
    for r in per {
        total += r?;
    }
    Ok(total / data.len() as f64)
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Canonical circuit text, or the MLP shape.
    pub model: String,
    pub optimizer: OptimizerKind,
    pub task: Task,
    pub param_count: usize,
    /// Losses at the initial parameters.
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    /// Losses after each epoch.
    pub history: Vec<EpochRecord>,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub val_confusion: ConfusionMatrix,
    pub degenerate_readouts: usize,
    /// Objective evaluations spent by the derivative-free solver.
    pub evaluations: Option<usize>,
    pub budget_exhausted: Option<bool>,
    pub final_params: Vec<f64>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl TrainReport {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.history {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }
}

fn finite_or_diverged(epoch: usize, loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(VpcError::Divergence { epoch, loss })
    }
}

/// Trains the shift parameters of `spec` with the configured optimizer.
pub fn fit(spec: &CircuitSpec, cfg: &TrainConfig, train: &Encoded, val: &Encoded) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.optimizer == OptimizerKind::DerivativeFree && spec.param_count() > DFO_MAX_PARAMS {
        return Err(VpcError::Config(format!(
            "derivative-free training supports at most {DFO_MAX_PARAMS} parameters, circuit has {}",
            spec.param_count()
        )));
    }
    let task = Task::for_classes(train.classes);
    check_data(spec, train, task)?;
    check_data(spec, val, task)?;
    let start = Instant::now();
    let params0 = cfg.init_params(spec.param_count());
    let (params, initial, history, evals, exhausted) = match cfg.optimizer {
        OptimizerKind::Adam => {
            let (p, i, h) = adam_loop(spec, cfg, train, val, task, params0)?;
            (p, i, h, None, None)
        }
        OptimizerKind::DerivativeFree => {
            let (p, i, h, e, x) = dfo_loop(spec, cfg, train, val, task, params0)?;
            (p, i, h, Some(e), Some(x))
        }
    };
    let tr = evaluate(spec, &params, train, task)?;
    let va = evaluate(spec, &params, val, task)?;
    let last = *history.last().unwrap_or(&initial);
    Ok(TrainReport {
        model: spec.to_string(),
        optimizer: cfg.optimizer,
        task,
        param_count: spec.param_count(),
        initial_train_loss: initial.train_loss,
        initial_val_loss: initial.val_loss,
        final_train_loss: last.train_loss,
        final_val_loss: last.val_loss,
        history,
        train_accuracy: tr.accuracy,
        val_accuracy: va.accuracy,
        val_confusion: va.confusion,
        degenerate_readouts: tr.degenerate + va.degenerate,
        evaluations: evals,
        budget_exhausted: exhausted,
        final_params: params,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn adam_loop(
    spec: &CircuitSpec,
    cfg: &TrainConfig,
    train: &Encoded,
    val: &Encoded,
    task: Task,
    mut params: Vec<f64>,
) -> Result<(Vec<f64>, EpochRecord, Vec<EpochRecord>)> {
    let kink = cfg.kink_tol();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let all: Vec<usize> = (0..train.len()).collect();
    // Full-batch training reuses the gradient computed alongside each loss.
    let mut grad = Vec::new();
    let initial_train = match cfg.batch_size {
        None => {
            let (l, g) = batch_value_grad(spec, &params, train, &all, task, kink)?;
            grad = g;
            l
        }
        Some(_) => mean_loss(spec, &params, train, task)?,
    };
    let initial = EpochRecord {
        epoch: 0,
        train_loss: finite_or_diverged(0, initial_train)?,
        val_loss: finite_or_diverged(0, mean_loss(spec, &params, val, task)?)?,
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        match cfg.batch_size {
            None => adam.step(&mut params, &grad),
            Some(bs) => {
                let mut order = all.clone();
                let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
                rng.set_stream(u64::MAX - epoch as u64);
                order.shuffle(&mut rng);
                for chunk in order.chunks(bs) {
                    let (l, g) = batch_value_grad(spec, &params, train, chunk, task, kink)?;
                    finite_or_diverged(epoch, l)?;
                    adam.step(&mut params, &g);
                }
            }
        }
        let train_loss = if cfg.batch_size.is_none() && epoch < cfg.epochs {
            let (l, g) = batch_value_grad(spec, &params, train, &all, task, kink)?;
            grad = g;
            l
        } else {
            mean_loss(spec, &params, train, task)?
        };
        let train_loss = finite_or_diverged(epoch, train_loss)?;
        let val_loss = finite_or_diverged(epoch, mean_loss(spec, &params, val, task)?)?;
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok((params, initial, history))
}

type DfoOut = (Vec<f64>, EpochRecord, Vec<EpochRecord>, usize, bool);

fn dfo_loop(
    spec: &CircuitSpec,
    cfg: &TrainConfig,
    train: &Encoded,
    val: &Encoded,
    task: Task,
    params0: Vec<f64>,
) -> Result<DfoOut> {
    let failure: RefCell<Option<VpcError>> = RefCell::new(None);
    let objective = |x: &[f64]| match mean_loss(spec, x, train, task) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => f64::INFINITY,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::INFINITY
        }
    };
    // The budget is spread over `epochs` history rows; a solver that
    // converges early leaves a shorter history.
    let every = cfg.max_evals.div_ceil(cfg.epochs).max(1);
    let mut initial = None;
    let mut history = Vec::new();
    let mut on_eval = |n: usize, best: &[f64], best_f: f64| {
        if n == 1 || n.is_multiple_of(every) {
            let val_loss = mean_loss(spec, best, val, task).unwrap_or(f64::NAN);
            let rec = EpochRecord {
                epoch: n / every,
                train_loss: best_f,
                val_loss,
            };
            if n == 1 {
                initial = Some(rec);
            } else {
                history.push(rec);
            }
        }
    };
    let opts = DfoOptions {
        rho_begin: cfg.rho_begin,
        rho_end: cfg.rho_end,
        max_evals: cfg.max_evals,
    };
    let res = dfo::minimize(objective, &params0, &opts, &mut on_eval);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if res.budget_exhausted {
        log::warn!("derivative-free solver used its {} evaluation budget", cfg.max_evals);
    }
    let initial = initial.expect("first evaluation recorded");
    finite_or_diverged(0, initial.train_loss)?;
    let done = history.last().map_or(0, |r| r.epoch);
    if res.evals % every != 0 || history.is_empty() {
        history.push(EpochRecord {
            epoch: done + 1,
            train_loss: finite_or_diverged(done + 1, res.f)?,
            val_loss: mean_loss(spec, &res.x, val, task)?,
        });
    }
    Ok((res.x, initial, history, res.evals, res.budget_exhausted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Correct predictions over all samples; degenerate readouts count as wrong.
    pub accuracy: f64,
    /// Mean loss over the samples with a usable readout.
    pub mean_loss: f64,
    pub confusion: ConfusionMatrix,
    pub degenerate: usize,
    pub predictions: Vec<Option<usize>>,
}

fn tally(preds: Vec<Option<usize>>, labels: &[usize], classes: usize, losses: Vec<f64>) -> Evaluation {
    let mut counts = vec![vec![0u64; classes]; classes];
    let mut degenerate = 0;
    for (p, &y) in preds.iter().zip(labels) {
        match p {
            Some(p) => counts[y][*p] += 1,
            None => degenerate += 1,
        }
    }
    let confusion = ConfusionMatrix { counts };
    let accuracy = confusion.trace() as f64 / labels.len().max(1) as f64;
    let mean_loss = if losses.is_empty() {
        f64::NAN
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    };
    Evaluation {
        accuracy,
        mean_loss,
        confusion,
        degenerate,
        predictions: preds,
    }
}

/// Predictions, confusion and mean loss of a trained circuit.
pub fn evaluate(spec: &CircuitSpec, params: &[f64], data: &Encoded, task: Task) -> Result<Evaluation> {
    check_data(spec, data, task)?;
    let per: Vec<Result<Option<(usize, f64)>>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let out = match forward(spec, params, &data.states[i], false) {
                Ok((out, _)) => out,
                Err(VpcError::DegenerateAmplitude { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let pred = match task {
                Task::Binary => binary_prob(&out).map(predict_binary),
                Task::Multiclass { classes } => multiclass_logits(&out, classes).map(|l| predict(&softmax(&l))),
            };
            match pred {
                Ok(p) => Ok(Some((p, task.loss(data.labels[i], 0.0).value(&out)?))),
                Err(VpcError::DegenerateAmplitude { thread, modulus }) => {
                    log::debug!("sample {i}: degenerate readout on thread {thread} (|z| = {modulus:e})");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut preds = Vec::with_capacity(data.len());
    let mut losses = Vec::new();
    for r in per {
        let r = r?;
        preds.push(r.map(|(p, _)| p));
        if let Some((_, l)) = r {
            losses.push(l);
        }
    }
    Ok(tally(preds, &data.labels, task.classes(), losses))
}

/// Trains an MLP on the encoded phases with Adam and cross-entropy.
pub fn fit_mlp(mlp: &MlpSpec, cfg: &TrainConfig, train: &Encoded, val: &Encoded) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let xtr = train.phases();
    let xva = val.phases();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let mut params = mlp.init(&mut rng);
    let mut adam = Adam::new(params.len(), cfg.learning_rate);

    let loss_grad = |p: &[f64], xs: &[Vec<f64>], ys: &[usize], idx: &[usize]| -> Result<(f64, Vec<f64>)> {
        let per: Vec<Result<(f64, Vec<f64>)>> = idx.par_iter().map(|&i| mlp.value_and_grad(p, &xs[i], ys[i])).collect();
        let mut total = 0.0;
        let mut grad = vec![0.0; p.len()];
        for r in per {
            let (l, g) = r?;
            total += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let n = idx.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    };
    let all_tr: Vec<usize> = (0..xtr.len()).collect();
    let all_va: Vec<usize> = (0..xva.len()).collect();
    let (l0, mut grad) = loss_grad(&params, &xtr, &train.labels, &all_tr)?;
    let initial = EpochRecord {
        epoch: 0,
        train_loss: finite_or_diverged(0, l0)?,
        val_loss: finite_or_diverged(0, loss_grad(&params, &xva, &val.labels, &all_va)?.0)?,
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        match cfg.batch_size {
            None => adam.step(&mut params, &grad),
            Some(bs) => {
                let mut order = all_tr.clone();
                let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
                rng.set_stream(u64::MAX - epoch as u64);
                order.shuffle(&mut rng);
                for chunk in order.chunks(bs) {
                    let (_, g) = loss_grad(&params, &xtr, &train.labels, chunk)?;
                    adam.step(&mut params, &g);
                }
            }
        }
        let (tl, g) = loss_grad(&params, &xtr, &train.labels, &all_tr)?;
        grad = g;
        let (vl, _) = loss_grad(&params, &xva, &val.labels, &all_va)?;
        history.push(EpochRecord {
            epoch,
            train_loss: finite_or_diverged(epoch, tl)?,
            val_loss: finite_or_diverged(epoch, vl)?,
        });
    }
    let tr = evaluate_mlp(mlp, &params, train)?;
    let va = evaluate_mlp(mlp, &params, val)?;
    let last = *history.last().unwrap_or(&initial);
    Ok(TrainReport {
        model: mlp.name(),
        optimizer: OptimizerKind::Adam,
        task: Task::Multiclass { classes: mlp.output },
        param_count: mlp.param_count(),
        initial_train_loss: initial.train_loss,
        initial_val_loss: initial.val_loss,
        history,
        final_train_loss: last.train_loss,
        final_val_loss: last.val_loss,
        train_accuracy: tr.accuracy,
        val_accuracy: va.accuracy,
        val_confusion: va.confusion,
        degenerate_readouts: 0,
        evaluations: None,
        budget_exhausted: None,
        final_params: params,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn evaluate_mlp(mlp: &MlpSpec, params: &[f64], data: &Encoded) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(VpcError::InvalidInput("empty sample set".into()));
    }
    let xs = data.phases();
    let mut preds = Vec::with_capacity(xs.len());
    let mut losses = Vec::with_capacity(xs.len());
    for (x, &y) in xs.iter().zip(&data.labels) {
        let probs = mlp.probs(params, x)?;
        losses.push(crate::readout::cross_entropy(&probs, y));
        preds.push(Some(predict(&probs)));
    }
    Ok(tally(preds, &data.labels, mlp.output, losses))
}
