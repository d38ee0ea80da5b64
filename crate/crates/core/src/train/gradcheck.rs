use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::fit::{Task, KINK_TOL};
use crate::autodiff::{grad_check, GradReport};
use crate::error::{Result, VpcError};
use crate::phasor::{forward, CircuitSpec, GateLayer, PhasorState};

/// Readout phases closer than this to a `|phi|` kink (0 or pi) are rejected.
pub const KINK_MARGIN: f64 = 1e-4;
/// Pre-normalize moduli below this are rejected.
pub const MIN_MODULUS: f64 = 1e-6;
const MAX_DRAWS: usize = 1000;

/// One randomized gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRun {
    pub circuit: String,
    pub task: Task,
    pub label: usize,
    pub seed: u64,
    /// Rejected draws before an admissible configuration.
    pub redraws: usize,
    pub fd_step: f64,
    pub report: GradReport,
}

/// Whether `(params, input)` is smooth enough for finite differences: every
/// multiclass readout phase keeps `KINK_MARGIN` from 0 and pi, and every state
/// entering a normalize layer has moduli above `MIN_MODULUS`.
pub fn admissible(spec: &CircuitSpec, params: &[f64], input: &PhasorState<f64>, task: Task) -> Result<bool> {
    let (out, tape) = match forward(spec, params, input, true) {
        Ok(r) => r,
        Err(VpcError::DegenerateAmplitude { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    let tape = tape.expect("recorded tape");
    for (entry, layer) in tape.entries().iter().zip(spec.layers()) {
        if matches!(layer, GateLayer::Normalize) && entry.pre.moduli().iter().any(|&m| m < MIN_MODULUS) {
            return Ok(false);
        }
    }
    if out.moduli()[..task.classes().min(out.len())].iter().any(|&m| m < MIN_MODULUS) {
        return Ok(false);
    }
    if let Task::Multiclass { classes } = task {
        let phases = out.phases();
        for &p in &phases[..classes] {
            let a = p.abs();
            if a < KINK_MARGIN || std::f64::consts::PI - a < KINK_MARGIN {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Draws parameters and input phases uniformly in `[-pi, pi)` from `seed`,
/// redrawing until [`admissible`], and compares analytic and central
/// finite-difference gradients.
pub fn random_grad_check(spec: &CircuitSpec, task: Task, seed: u64, fd_step: f64, kink_guard: bool) -> Result<GradCheckRun> {
    if task.classes() > spec.n_threads() {
        return Err(VpcError::Config(format!(
            "{} classes need at least as many threads, circuit has {}",
            task.classes(),
            spec.n_threads()
        )));
    }
    if !(fd_step > 0.0) || !fd_step.is_finite() {
        return Err(VpcError::Config("finite-difference step must be positive".into()));
    }
    let pi = std::f64::consts::PI;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let label = (seed % task.classes() as u64) as usize;
    let loss = task.loss(label, if kink_guard { KINK_TOL } else { 0.0 });
    for redraws in 0..MAX_DRAWS {
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-pi..pi)).collect();
        let phases: Vec<f64> = (0..spec.n_threads()).map(|_| rng.gen_range(-pi..pi)).collect();
        let input = PhasorState::from_phases(&phases)?;
        if !admissible(spec, &params, &input, task)? {
            continue;
        }
        let report = grad_check(spec, &params, &input, &loss, fd_step)?;
        return Ok(GradCheckRun {
            circuit: spec.to_string(),
            task,
            label,
            seed,
            redraws,
            fd_step,
            report,
        });
    }
    Err(VpcError::InvalidInput(format!(
        "no admissible configuration in {MAX_DRAWS} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::Builtin;

    #[test]
    fn single_stack_multiclass() {
        let spec = CircuitSpec::builtin(Builtin::SingleStack, 4, 1).unwrap();
        let r = random_grad_check(&spec, Task::Multiclass { classes: 4 }, 1, 1e-5, true).unwrap();
        assert!(r.report.max_rel_err < 1e-5, "{:?}", r.report);
        assert_eq!(r.report.analytic.len(), 8);
    }

    #[test]
    fn deep_stack_binary_and_multiclass() {
        let spec = CircuitSpec::builtin(Builtin::DeepStack, 8, 2).unwrap();
        for seed in 0..5 {
            for task in [Task::Binary, Task::Multiclass { classes: 4 }] {
                let r = random_grad_check(&spec, task, seed, 1e-5, true).unwrap();
                assert!(r.report.max_rel_err < 1e-5, "{seed} {task:?}: {}", r.report.max_rel_err);
            }
        }
    }

    #[test]
    fn parameter_free_circuit_is_exact() {
        let spec: CircuitSpec = "threads=4 mix-even".parse().unwrap();
        let r = random_grad_check(&spec, Task::Binary, 0, 1e-5, true).unwrap();
        assert_eq!(r.report.max_rel_err, 0.0);
        assert!(r.report.analytic.is_empty());
    }

    #[test]
    fn rejects_kinks() {
        let spec: CircuitSpec = "threads=4".parse().unwrap();
        let at_zero = PhasorState::from_phases(&[0.0, 1.0, 1.0, 1.0]).unwrap();
        let at_pi = PhasorState::from_phases(&[1.0, std::f64::consts::PI, 1.0, 1.0]).unwrap();
        let fine = PhasorState::from_phases(&[1.0, -1.0, 2.0, 0.5]).unwrap();
        let task = Task::Multiclass { classes: 4 };
        assert!(!admissible(&spec, &[], &at_zero, task).unwrap());
        assert!(!admissible(&spec, &[], &at_pi, task).unwrap());
        assert!(admissible(&spec, &[], &fine, task).unwrap());
        assert!(admissible(&spec, &[], &at_zero, Task::Binary).unwrap());
    }

    #[test]
    fn bad_arguments() {
        let spec = CircuitSpec::builtin(Builtin::SingleStack, 2, 1).unwrap();
        assert!(random_grad_check(&spec, Task::Multiclass { classes: 4 }, 0, 1e-5, true).is_err());
        assert!(random_grad_check(&spec, Task::Binary, 0, 0.0, true).is_err());
    }
}
