//! Decoding final circuit states into probabilities, losses and metrics.
//!
//! Binary readout uses thread 0: `P(y=1) = (sin(arg z_0) + 1) / 2`.
//! Multiclass readout uses threads `0..K`: logits `|arg z_k|` go through a
//! softmax and are scored with cross-entropy.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::autodiff::{arg_gradient, Cotangent, StateLoss};
use crate::error::{Result, VpcError};
use crate::phasor::PhasorState;
use crate::scalar::Scalar;

/// Floor applied to the target probability inside the cross-entropy logarithm.
pub const EPS_LOG: f64 = 1e-12;

fn readout_amp<T: Scalar>(state: &PhasorState<T>, k: usize) -> Result<Complex<T>> {
    let z = state.amps()[k];
    let r = z.norm();
    if !(r >= T::pullback_eps()) {
        return Err(VpcError::DegenerateAmplitude {
            thread: k,
            modulus: r.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(z)
}

/// `(sin(arg z_0) + 1) / 2`.
pub fn binary_prob<T: Scalar>(state: &PhasorState<T>) -> Result<T> {
    let z = readout_amp(state, 0)?;
    let half = T::lit(0.5);
    Ok((z.im.atan2(z.re).sin() + T::one()) * half)
}

/// `|arg z_k|` for the first `k` threads.
pub fn multiclass_logits<T: Scalar>(state: &PhasorState<T>, k: usize) -> Result<Vec<T>> {
    if k == 0 || k > state.len() {
        return Err(VpcError::dim("multiclass readout threads", state.len(), k));
    }
    (0..k)
        .map(|j| readout_amp(state, j).map(|z| z.im.atan2(z.re).abs()))
        .collect()
}

/// Probabilities over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector<T> {
    pub probs: Vec<T>,
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> ProbVector<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let total = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    ProbVector {
        probs: exps.into_iter().map(|e| e / total).collect(),
    }
}

/// `((p - y)^2, 2 (p - y))`.
pub fn mse_loss<T: Scalar>(p: T, label: usize) -> (T, T) {
    let y = if label == 1 { T::one() } else { T::zero() };
    let d = p - y;
    (d * d, d + d)
}

/// `-ln(max(p_y, EPS_LOG))`.
pub fn cross_entropy<T: Scalar>(probs: &ProbVector<T>, label: usize) -> T {
    -probs.probs[label].max(T::lit(EPS_LOG)).ln()
}

/// Gradient of softmax cross-entropy with respect to the logits: `p - onehot(y)`.
pub fn cross_entropy_logit_grad<T: Scalar>(probs: &ProbVector<T>, label: usize) -> Vec<T> {
    probs
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| if k == label { p - T::one() } else { p })
        .collect()
}

/// Argmax with ties going to the lowest index.
pub fn predict<T: Scalar>(probs: &ProbVector<T>) -> usize {
    let mut best = 0;
    for (k, &p) in probs.probs.iter().enumerate().skip(1) {
        if p > probs.probs[best] {
            best = k;
        }
    }
    best
}

/// Class 1 iff `p > 0.5`; exactly 0.5 goes to class 0.
pub fn predict_binary<T: Scalar>(p: T) -> usize {
    usize::from(p > T::lit(0.5))
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|k| self.counts[k][k]).sum()
    }

    /// `K` lines of `K` comma-separated counts.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.counts {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if preds.is_empty() {
        return Err(VpcError::InvalidInput("empty evaluation set".into()));
    }
    if preds.len() != labels.len() {
        return Err(VpcError::dim("confusion labels", preds.len(), labels.len()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &y) in preds.iter().zip(labels) {
        if p >= k || y >= k {
            return Err(VpcError::InvalidInput(format!("class index out of range for K={k}")));
        }
        counts[y][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// `trace / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(VpcError::InvalidInput("empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Per-sample readout loss, differentiable with respect to the final state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReadoutLoss {
    /// Squared error of the thread-0 probability.
    BinaryMse { label: usize },
    /// Softmax cross-entropy over `|arg z_k|`, `k < classes`.
    ///
    /// The derivative of `|phi|` is taken as 0 when `|phi| < kink_tol`
    /// (and exactly at `phi = 0` when `kink_tol` is 0).
    CrossEntropy {
        label: usize,
        classes: usize,
        kink_tol: f64,
    },
}

impl<T: Scalar> StateLoss<T> for ReadoutLoss {
    fn value_and_cotangent(&self, state: &PhasorState<T>) -> Result<(T, Cotangent<T>)> {
        let mut cot = Cotangent::zeros(state.len());
        match *self {
            ReadoutLoss::BinaryMse { label } => {
                let z = readout_amp(state, 0)?;
                let phi = z.im.atan2(z.re);
                let p = (phi.sin() + T::one()) * T::lit(0.5);
                let (loss, dp) = mse_loss(p, label);
                let dphi = dp * phi.cos() * T::lit(0.5);
                cot.d[0] = arg_gradient(z) * dphi;
                Ok((loss, cot))
            }
            ReadoutLoss::CrossEntropy {
                label,
                classes,
                kink_tol,
            } => {
                if label >= classes {
                    return Err(VpcError::InvalidInput(format!("label {label} >= {classes} classes")));
                }
                let logits = multiclass_logits(state, classes)?;
                let probs = softmax(&logits);
                let loss = cross_entropy(&probs, label);
                let dlogit = cross_entropy_logit_grad(&probs, label);
                let tol = T::lit(kink_tol);
                for k in 0..classes {
                    let z = state.amps()[k];
                    let phi = z.im.atan2(z.re);
                    let sign = if phi.abs() <= tol || phi == T::zero() {
                        T::zero()
                    } else {
                        phi.signum()
                    };
                    cot.d[k] = arg_gradient(z) * (dlogit[k] * sign);
                }
                Ok((loss, cot))
            }
        }
    }
}
