//! The three gate primitives: diagonal phase shift, the 2x2 beam-splitter
//! mix and the threadwise pull-back onto the torus.
//!
//! Each gate has a pure form taking `&PhasorState` and an in-place kernel on
//! amplitude slices used by the forward pass.

use num_complex::Complex;

use super::state::PhasorState;
use crate::error::{Result, VpcError};
use crate::scalar::Scalar;

/// Which adjacent pairs a mix layer couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    /// Pairs (0,1), (2,3), ...
    Even,
    /// Pairs (1,2), (3,4), ...
    Odd,
}

impl Parity {
    pub(crate) fn offset(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

/// `e^{i theta}` as a complex number.
#[inline]
pub(crate) fn cis<T: Scalar>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

pub(crate) fn shift_in_place<T: Scalar>(amps: &mut [Complex<T>], thetas: &[T]) {
    debug_assert_eq!(amps.len(), thetas.len());
    for (z, &t) in amps.iter_mut().zip(thetas) {
        *z = *z * cis(t);
    }
}

/// `(z_j, z_k) <- ((z_j + i z_k)/sqrt2, (i z_j + z_k)/sqrt2)`.
#[inline]
pub(crate) fn mix_pair_in_place<T: Scalar>(amps: &mut [Complex<T>], j: usize, k: usize) {
    let s = T::FRAC_1_SQRT_2();
    let (a, b) = (amps[j], amps[k]);
    amps[j] = Complex::new((a.re - b.im) * s, (a.im + b.re) * s);
    amps[k] = Complex::new((b.re - a.im) * s, (b.im + a.re) * s);
}

pub(crate) fn mix_layer_in_place<T: Scalar>(amps: &mut [Complex<T>], parity: Parity) {
    let n = amps.len();
    let mut j = parity.offset();
    while j + 1 < n {
        mix_pair_in_place(amps, j, j + 1);
        j += 2;
    }
}

pub(crate) fn check_pullback<T: Scalar>(amps: &[Complex<T>]) -> Result<()> {
    let eps = T::pullback_eps();
    for (k, z) in amps.iter().enumerate() {
        let r = z.norm();
        if !(r >= eps) {
            return Err(VpcError::DegenerateAmplitude {
                thread: k,
                modulus: r.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

pub(crate) fn normalize_in_place<T: Scalar>(amps: &mut [Complex<T>]) -> Result<()> {
    check_pullback(amps)?;
    for z in amps.iter_mut() {
        let r = z.norm();
        *z = Complex::new(z.re / r, z.im / r);
    }
    Ok(())
}

/// Rotates thread `k` by `e^{i thetas[k]}`.
pub fn apply_shift<T: Scalar>(state: &PhasorState<T>, thetas: &[T]) -> Result<PhasorState<T>> {
    if thetas.len() != state.len() {
        return Err(VpcError::dim("apply_shift", state.len(), thetas.len()));
    }
    let mut out = state.clone();
    shift_in_place(out.amps_mut(), thetas);
    Ok(out)
}

/// Applies the beam-splitter `M = [[1, i], [i, 1]] / sqrt2` to threads `j` and `k`.
pub fn apply_mix_pair<T: Scalar>(state: &PhasorState<T>, j: usize, k: usize) -> Result<PhasorState<T>> {
    let n = state.len();
    if j >= n {
        return Err(VpcError::dim("apply_mix_pair index", n, j));
    }
    if k >= n {
        return Err(VpcError::dim("apply_mix_pair index", n, k));
    }
    if j == k {
        return Err(VpcError::InvalidInput(format!("mix pair needs distinct threads, got ({j}, {k})")));
    }
    let mut out = state.clone();
    mix_pair_in_place(out.amps_mut(), j, k);
    Ok(out)
}

/// Mixes every disjoint adjacent pair at the given parity. An unpaired
/// trailing thread passes through.
pub fn apply_mix_layer<T: Scalar>(state: &PhasorState<T>, parity: Parity) -> PhasorState<T> {
    let mut out = state.clone();
    mix_layer_in_place(out.amps_mut(), parity);
    out
}

/// Pull-back `z_k / |z_k|`. Fails if any thread is below the pull-back threshold.
pub fn apply_normalize<T: Scalar>(state: &PhasorState<T>) -> Result<PhasorState<T>> {
    let mut out = state.clone();
    normalize_in_place(out.amps_mut())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn st(z: &[(f64, f64)]) -> PhasorState<f64> {
        PhasorState::from_amps(z.iter().map(|&(a, b)| Complex::new(a, b)).collect()).unwrap()
    }

    fn close(a: &PhasorState<f64>, b: &[(f64, f64)], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (z, &(re, im)) in a.amps().iter().zip(b) {
            assert_abs_diff_eq!(z.re, re, epsilon = tol);
            assert_abs_diff_eq!(z.im, im, epsilon = tol);
        }
    }

    #[test]
    fn shift_examples() {
        let s = PhasorState::from_phases(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(apply_shift(&s, &[0.0; 3]).unwrap(), s);
        close(&apply_shift(&st(&[(1.0, 0.0)]), &[FRAC_PI_2]).unwrap(), &[(0.0, 1.0)], 1e-15);
        close(&apply_shift(&st(&[(0.0, 1.0)]), &[FRAC_PI_2]).unwrap(), &[(-1.0, 0.0)], 1e-15);
    }

    #[test]
    fn shift_length_mismatch() {
        let s = PhasorState::from_phases(&[0.0, 1.0]).unwrap();
        assert!(matches!(apply_shift(&s, &[0.0]), Err(VpcError::Dimension { .. })));
    }

    #[test]
    fn mix_pair_examples() {
        let h = 1.0 / SQRT_2;
        let out = apply_mix_pair(&st(&[(1.0, 0.0), (1.0, 0.0)]), 0, 1).unwrap();
        close(&out, &[(h, h), (h, h)], 1e-15);
        assert_abs_diff_eq!(out.amps()[0].norm(), 1.0, epsilon = 1e-15);

        let out = apply_mix_pair(&st(&[(0.0, 1.0), (1.0, 0.0)]), 0, 1).unwrap();
        close(&out, &[(0.0, SQRT_2), (0.0, 0.0)], 1e-15);
        assert_abs_diff_eq!(out.amps()[0].norm_sqr(), 1.0 + (FRAC_PI_2).sin(), epsilon = 1e-14);

        let out = apply_mix_pair(&st(&[(1.0, 0.0), (0.0, 1.0)]), 0, 1).unwrap();
        close(&out, &[(0.0, 0.0), (0.0, SQRT_2)], 1e-15);
    }

    #[test]
    fn mix_pair_bad_indices() {
        let s = PhasorState::from_phases(&[0.0, 1.0]).unwrap();
        assert!(matches!(apply_mix_pair(&s, 0, 2), Err(VpcError::Dimension { .. })));
        assert!(apply_mix_pair(&s, 1, 1).is_err());
    }

    #[test]
    fn mix_layer_parities() {
        let s = PhasorState::from_phases(&[0.1, 0.7, -1.3, 2.9]).unwrap();
        let even = apply_mix_layer(&s, Parity::Even);
        let manual = apply_mix_pair(&apply_mix_pair(&s, 0, 1).unwrap(), 2, 3).unwrap();
        assert_eq!(even, manual);

        let odd = apply_mix_layer(&s, Parity::Odd);
        assert_eq!(odd.amps()[0], s.amps()[0]);
        assert_eq!(odd.amps()[3], s.amps()[3]);
        assert_eq!(odd, apply_mix_pair(&s, 1, 2).unwrap());

        let one = PhasorState::from_phases(&[0.4]).unwrap();
        assert_eq!(apply_mix_layer(&one, Parity::Even), one);
        assert_eq!(apply_mix_layer(&one, Parity::Odd), one);
    }

    #[test]
    fn odd_thread_count_passes_tail_through() {
        let s = PhasorState::from_phases(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(apply_mix_layer(&s, Parity::Even).amps()[2], s.amps()[2]);
        assert_eq!(apply_mix_layer(&s, Parity::Odd).amps()[0], s.amps()[0]);
    }

    #[test]
    fn normalize_examples() {
        close(&apply_normalize(&st(&[(3.0, 4.0)])).unwrap(), &[(0.6, 0.8)], 1e-15);
        let t = PhasorState::from_phases(&[0.3, -2.0, PI]).unwrap();
        close(
            &apply_normalize(&t).unwrap(),
            &t.amps().iter().map(|z| (z.re, z.im)).collect::<Vec<_>>(),
            1e-12,
        );
        let err = apply_normalize(&st(&[(0.0, SQRT_2), (0.5e-12, 0.0)])).unwrap_err();
        assert!(matches!(err, VpcError::DegenerateAmplitude { thread: 1, .. }));
    }

    #[test]
    fn f32_gates() {
        let s = PhasorState::<f32>::from_phases(&[0.3, 1.1, -0.4, 2.0]).unwrap();
        let out = apply_mix_layer(&apply_mix_layer(&s, Parity::Even), Parity::Odd);
        assert!((out.norm() - 2.0).abs() < 1e-5);
        assert!(apply_normalize(&out).unwrap().is_on_torus_within(1e-6));
    }
}
