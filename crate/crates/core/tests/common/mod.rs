#![allow(dead_code)]

use std::io::Write;

use num_complex::Complex64 as C;
use vpc_core::phasor::{GateLayer, Parity};
use vpc_core::CircuitSpec;

/// Writes straight to the process stdout so the line survives test capture.
pub fn verdict(id: u8, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] criterion {id:>2}: {name} | {detail}");
}

pub type Mat = Vec<Vec<C>>;

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }).collect())
        .collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &Mat, v: &[C]) -> Vec<C> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn shift_matrix(thetas: &[f64]) -> Mat {
    let mut m = identity(thetas.len());
    for (k, &t) in thetas.iter().enumerate() {
        m[k][k] = C::from_polar(1.0, t);
    }
    m
}

/// Block-diagonal (1/sqrt 2)[[1, i], [i, 1]] on the pairs of one parity.
pub fn mix_matrix(n: usize, parity: Parity) -> Mat {
    let mut m = identity(n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let start = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let mut j = start;
    while j + 1 < n {
        m[j][j] = C::new(s, 0.0);
        m[j][j + 1] = C::new(0.0, s);
        m[j + 1][j] = C::new(0.0, s);
        m[j + 1][j + 1] = C::new(s, 0.0);
        j += 2;
    }
    m
}

/// Matrix of every layer, in order. Panics on normalize layers.
pub fn layer_matrices(spec: &CircuitSpec, params: &[f64]) -> Vec<Mat> {
    let n = spec.n_threads();
    spec.layers()
        .iter()
        .map(|l| match *l {
            GateLayer::Shift { offset } => shift_matrix(&params[offset..offset + n]),
            GateLayer::Mix(p) => mix_matrix(n, p),
            GateLayer::Normalize => panic!("normalize has no matrix"),
        })
        .collect()
}

pub fn oracle_forward(spec: &CircuitSpec, params: &[f64], z: &[C]) -> Vec<C> {
    let u = layer_matrices(spec, params)
        .iter()
        .fold(identity(spec.n_threads()), |acc, m| matmul(m, &acc));
    matvec(&u, z)
}

/// Gradient of `L` with output cotangent `g` (packed dL/dx + i dL/dy): for
/// shift layer `l`, `dz_out/dtheta_k = U_after (i psi_k e_k)` with `psi` the
/// state after that shift, and `dL/dtheta_k = Re(conj(g) . dz_out)`.
pub fn oracle_grad(spec: &CircuitSpec, params: &[f64], z: &[C], g: &[C]) -> Vec<f64> {
    let n = spec.n_threads();
    let mats = layer_matrices(spec, params);
    let mut grad = vec![0.0; params.len()];
    for (li, layer) in spec.layers().iter().enumerate() {
        let GateLayer::Shift { offset } = *layer else { continue };
        let before = mats[..=li].iter().fold(identity(n), |acc, m| matmul(m, &acc));
        let after = mats[li + 1..].iter().fold(identity(n), |acc, m| matmul(m, &acc));
        let psi = matvec(&before, z);
        for k in 0..n {
            let mut e = vec![C::new(0.0, 0.0); n];
            e[k] = C::new(0.0, 1.0) * psi[k];
            let dz = matvec(&after, &e);
            grad[offset + k] = g.iter().zip(&dz).map(|(a, b)| (a.conj() * b).re).sum();
        }
    }
    grad
}
