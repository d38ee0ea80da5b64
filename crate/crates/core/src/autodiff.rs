//! Reverse-mode gradients of scalar losses with respect to shift parameters.
//!
//! Every complex thread is treated as two independent real coordinates
//! `(x, y)`. A cotangent stores `dL/dx + i dL/dy` per thread, so unitary
//! layers pull back through their conjugate transpose and the non-holomorphic
//! pull-back is handled through its real 2x2 Jacobian.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VpcError};
use crate::phasor::{check_pullback, cis, forward, CircuitSpec, GateLayer, Parity, PhasorState, Tape};
use crate::scalar::Scalar;

/// Per-thread gradient `(dL/dre, dL/dim)`, packed as `dL/dre + i dL/dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cotangent<T> {
    pub d: Vec<Complex<T>>,
}

impl<T: Scalar> Cotangent<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            d: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Self {
        Self {
            d: pairs.iter().map(|&(a, b)| Complex::new(a, b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Euclidean norm of the flattened `2N` real vector.
    pub fn norm(&self) -> T {
        self.d.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt()
    }
}

/// Analytic vs finite-difference gradients for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub analytic: Vec<f64>,
    pub fd: Vec<f64>,
    pub max_rel_err: f64,
}

/// Gradient of `arg z` with respect to `(x, y)`: `(-y, x) / r^2`, packed as a
/// cotangent.
#[inline]
pub fn arg_gradient<T: Scalar>(z: Complex<T>) -> Complex<T> {
    let r2 = z.norm_sqr();
    Complex::new(-z.im / r2, z.re / r2)
}

/// Pull-back through `z' = z e^{i theta}`.
///
/// `grad_theta[k] = <cot_k, i z'_k>` in real coordinates and the incoming
/// cotangent is the outgoing one rotated by `-theta_k`.
pub fn vjp_shift<T: Scalar>(
    cot: &Cotangent<T>,
    pre_state: &PhasorState<T>,
    thetas: &[T],
) -> Result<(Cotangent<T>, Vec<T>)> {
    let n = pre_state.len();
    if cot.len() != n {
        return Err(VpcError::dim("vjp_shift cotangent", n, cot.len()));
    }
    if thetas.len() != n {
        return Err(VpcError::dim("vjp_shift thetas", n, thetas.len()));
    }
    let mut cot_in = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    for ((g, z), &t) in cot.d.iter().zip(pre_state.amps()).zip(thetas) {
        let rot = cis(t);
        let out = *z * rot;
        // i * out = (-out.im, out.re)
        grad.push(g.re * -out.im + g.im * out.re);
        cot_in.push(*g * rot.conj());
    }
    Ok((Cotangent { d: cot_in }, grad))
}

fn mix_adjoint_pair<T: Scalar>(d: &mut [Complex<T>], j: usize, k: usize) {
    // M^dagger = [[1, -i], [-i, 1]] / sqrt2
    let s = T::FRAC_1_SQRT_2();
    let (a, b) = (d[j], d[k]);
    d[j] = Complex::new((a.re + b.im) * s, (a.im - b.re) * s);
    d[k] = Complex::new((b.re + a.im) * s, (b.im - a.re) * s);
}

/// Pull-back through a mix layer: pairwise `M^dagger`.
pub fn vjp_mix_layer<T: Scalar>(cot: &Cotangent<T>, parity: Parity) -> Cotangent<T> {
    let mut d = cot.d.clone();
    let n = d.len();
    let mut j = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    while j + 1 < n {
        mix_adjoint_pair(&mut d, j, j + 1);
        j += 2;
    }
    Cotangent { d }
}

/// Pull-back through `z / |z|` using the symmetric Jacobian
/// `[[y^2, -xy], [-xy, x^2]] / r^3`.
pub fn vjp_normalize<T: Scalar>(cot: &Cotangent<T>, pre_state: &PhasorState<T>) -> Result<Cotangent<T>> {
    if cot.len() != pre_state.len() {
        return Err(VpcError::dim("vjp_normalize cotangent", pre_state.len(), cot.len()));
    }
    check_pullback(pre_state.amps())?;
    let d = cot
        .d
        .iter()
        .zip(pre_state.amps())
        .map(|(g, z)| {
            let (x, y) = (z.re, z.im);
            let r = z.norm();
            let r3 = r * r * r;
            Complex::new((y * y * g.re - x * y * g.im) / r3, (x * x * g.im - x * y * g.re) / r3)
        })
        .collect();
    Ok(Cotangent { d })
}

/// Gradient of the loss with respect to every shift parameter, given the
/// cotangent of the circuit output.
pub fn backward<T: Scalar>(
    tape: &Tape<T>,
    spec: &CircuitSpec,
    params: &[T],
    out_cot: &Cotangent<T>,
) -> Result<Vec<T>> {
    let n = spec.n_threads();
    if params.len() != spec.param_count() {
        return Err(VpcError::dim("backward params", spec.param_count(), params.len()));
    }
    if tape.entries().len() != spec.layers().len() {
        return Err(VpcError::TapeMismatch(format!(
            "tape has {} entries, circuit has {} layers",
            tape.entries().len(),
            spec.layers().len()
        )));
    }
    if out_cot.len() != n || tape.output().len() != n {
        return Err(VpcError::dim("backward cotangent", n, out_cot.len()));
    }
    let mut grad = vec![T::zero(); params.len()];
    let mut cot = out_cot.clone();
    for (entry, &layer) in tape.entries().iter().zip(spec.layers()).rev() {
        cot = match layer {
            GateLayer::Shift { offset } => {
                let thetas = &params[offset..offset + n];
                let (c, g) = vjp_shift(&cot, &entry.pre, thetas)?;
                grad[offset..offset + n].copy_from_slice(&g);
                c
            }
            GateLayer::Mix(p) => vjp_mix_layer(&cot, p),
            GateLayer::Normalize => vjp_normalize(&cot, &entry.pre)?,
        };
    }
    Ok(grad)
}

/// A scalar loss on a final circuit state that can also report its cotangent.
pub trait StateLoss<T> {
    fn value_and_cotangent(&self, state: &PhasorState<T>) -> Result<(T, Cotangent<T>)>;

    fn value(&self, state: &PhasorState<T>) -> Result<T> {
        Ok(self.value_and_cotangent(state)?.0)
    }
}

impl<T, F> StateLoss<T> for F
where
    F: Fn(&PhasorState<T>) -> Result<(T, Cotangent<T>)>,
{
    fn value_and_cotangent(&self, state: &PhasorState<T>) -> Result<(T, Cotangent<T>)> {
        self(state)
    }
}

/// Loss value and parameter gradient for one input.
pub fn value_and_grad<T: Scalar, L: StateLoss<T> + ?Sized>(
    spec: &CircuitSpec,
    params: &[T],
    input: &PhasorState<T>,
    loss: &L,
) -> Result<(T, Vec<T>)> {
    let (out, tape) = forward(spec, params, input, true)?;
    let (value, cot) = loss.value_and_cotangent(&out)?;
    let tape = tape.expect("recorded tape");
    Ok((value, backward(&tape, spec, params, &cot)?))
}

/// Relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares the analytic gradient against central differences
/// `(L(theta + h) - L(theta - h)) / 2h` for every parameter.
pub fn grad_check<T: Scalar, L: StateLoss<T> + ?Sized>(
    spec: &CircuitSpec,
    params: &[T],
    input: &PhasorState<T>,
    loss: &L,
    fd_step: T,
) -> Result<GradReport> {
    let (_, analytic) = value_and_grad(spec, params, input, loss)?;
    let mut theta = params.to_vec();
    let mut fd = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let orig = theta[p];
        theta[p] = orig + fd_step;
        let plus = loss.value(&forward(spec, &theta, input, false)?.0)?;
        theta[p] = orig - fd_step;
        let minus = loss.value(&forward(spec, &theta, input, false)?.0)?;
        theta[p] = orig;
        fd.push((plus - minus) / (fd_step + fd_step));
    }
    let to64 = |v: Vec<T>| -> Vec<f64> { v.into_iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect() };
    let analytic = to64(analytic);
    let fd = to64(fd);
    let max_rel_err = analytic
        .iter()
        .zip(&fd)
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max);
    Ok(GradReport {
        analytic,
        fd,
        max_rel_err,
    })
}
