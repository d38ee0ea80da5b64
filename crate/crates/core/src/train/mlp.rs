//! One-hidden-layer tanh MLP with a softmax head, used as a classical baseline.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VpcError};
use crate::readout::{cross_entropy, cross_entropy_logit_grad, softmax, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self { input, hidden, output }
    }

    pub fn param_count(&self) -> usize {
        self.input * self.hidden + self.hidden + self.hidden * self.output + self.output
    }

    pub fn name(&self) -> String {
        format!("mlp({},{},{})", self.input, self.hidden, self.output)
    }

    /// Uniform in `+-1/sqrt(fan_in)` per layer.
    pub fn init(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        let a1 = 1.0 / (self.input.max(1) as f64).sqrt();
        let a2 = 1.0 / (self.hidden.max(1) as f64).sqrt();
        for _ in 0..self.input * self.hidden + self.hidden {
            p.push(rng.gen_range(-a1..a1));
        }
        for _ in 0..self.hidden * self.output + self.output {
            p.push(rng.gen_range(-a2..a2));
        }
        p
    }

    fn check(&self, params: &[f64], x: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(VpcError::dim("mlp params", self.param_count(), params.len()));
        }
        if x.len() != self.input {
            return Err(VpcError::dim("mlp input", self.input, x.len()));
        }
        Ok(())
    }

    fn hidden_act(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let (w1, rest) = params.split_at(self.input * self.hidden);
        let b1 = &rest[..self.hidden];
        (0..self.hidden)
            .map(|j| {
                let row = &w1[j * self.input..(j + 1) * self.input];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[j]).tanh()
            })
            .collect()
    }

    fn logits(&self, params: &[f64], h: &[f64]) -> Vec<f64> {
        let off = self.input * self.hidden + self.hidden;
        let (w2, b2) = params[off..].split_at(self.hidden * self.output);
        (0..self.output)
            .map(|o| {
                let row = &w2[o * self.hidden..(o + 1) * self.hidden];
                row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + b2[o]
            })
            .collect()
    }

    pub fn probs(&self, params: &[f64], x: &[f64]) -> Result<ProbVector<f64>> {
        self.check(params, x)?;
        let h = self.hidden_act(params, x);
        Ok(softmax(&self.logits(params, &h)))
    }

    /// Cross-entropy and its gradient for one sample.
    pub fn value_and_grad(&self, params: &[f64], x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        self.check(params, x)?;
        if label >= self.output {
            return Err(VpcError::InvalidInput(format!("label {label} >= {} outputs", self.output)));
        }
        let h = self.hidden_act(params, x);
        let probs = softmax(&self.logits(params, &h));
        let loss = cross_entropy(&probs, label);
        let dl = cross_entropy_logit_grad(&probs, label);

        let (ni, nh, no) = (self.input, self.hidden, self.output);
        let mut g = vec![0.0; self.param_count()];
        let off2 = ni * nh + nh;
        let w2 = &params[off2..off2 + nh * no];
        let mut dh = vec![0.0; nh];
        for o in 0..no {
            for j in 0..nh {
                g[off2 + o * nh + j] = dl[o] * h[j];
                dh[j] += dl[o] * w2[o * nh + j];
            }
            g[off2 + nh * no + o] = dl[o];
        }
        for j in 0..nh {
            let da = dh[j] * (1.0 - h[j] * h[j]);
            for i in 0..ni {
                g[j * ni + i] = da * x[i];
            }
            g[ni * nh + j] = da;
        }
        Ok((loss, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn benchmark_param_count() {
        assert_eq!(MlpSpec::new(32, 64, 4).param_count(), 2372);
        assert_eq!(MlpSpec::new(32, 64, 4).name(), "mlp(32,64,4)");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = MlpSpec::new(5, 4, 3);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = spec.init(&mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, g) = spec.value_and_grad(&p, &x, 1).unwrap();
        let h = 1e-6;
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] += h;
            let up = spec.value_and_grad(&q, &x, 1).unwrap().0;
            q[k] -= 2.0 * h;
            let dn = spec.value_and_grad(&q, &x, 1).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let spec = MlpSpec::new(3, 2, 2);
        assert!(spec.probs(&[0.0; 5], &[0.0; 3]).is_err());
        assert!(spec.probs(&vec![0.0; spec.param_count()], &[0.0; 2]).is_err());
        assert!(spec.value_and_grad(&vec![0.0; spec.param_count()], &[0.0; 3], 2).is_err());
    }
}
