use num_complex::Complex;

use crate::error::{Result, VpcError};
use crate::scalar::Scalar;

/// Default tolerance for [`PhasorState::is_on_torus`].
pub const TORUS_TOL: f64 = 1e-12;

/// A vector of complex thread amplitudes.
///
/// States produced by [`PhasorState::from_phases`] lie on the torus (every
/// thread has unit modulus). Mixing legally moves a state off the torus into
/// the ambient complex space, so the torus constraint is only checked on
/// demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorState<T> {
    amps: Vec<Complex<T>>,
}

impl<T: Scalar> PhasorState<T> {
    /// Builds a state from raw amplitudes. Requires at least one thread and
    /// finite components.
    pub fn from_amps(amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.is_empty() {
            return Err(VpcError::InvalidInput("state needs at least one thread".into()));
        }
        if let Some(k) = amps.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(VpcError::InvalidInput(format!("non-finite amplitude on thread {k}")));
        }
        Ok(Self { amps })
    }

    /// Lifts phase angles onto the torus: `z_k = (cos phi_k, sin phi_k)`.
    pub fn from_phases(phases: &[T]) -> Result<Self> {
        if phases.is_empty() {
            return Err(VpcError::InvalidInput("state needs at least one thread".into()));
        }
        if let Some(k) = phases.iter().position(|p| !p.is_finite()) {
            return Err(VpcError::InvalidInput(format!("non-finite phase on thread {k}")));
        }
        let amps = phases
            .iter()
            .map(|&p| Complex::new(p.cos(), p.sin()))
            .collect();
        Ok(Self { amps })
    }

    /// Number of threads.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    /// Always false; a state has at least one thread.
    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex<T>> {
        self.amps
    }

    /// Euclidean norm over all threads.
    pub fn norm(&self) -> T {
        self.amps
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// Per-thread moduli.
    pub fn moduli(&self) -> Vec<T> {
        self.amps.iter().map(|z| z.norm()).collect()
    }

    /// Principal phases in (-pi, pi], via the two-argument arctangent.
    pub fn phases(&self) -> Vec<T> {
        self.amps.iter().map(|z| z.im.atan2(z.re)).collect()
    }

    /// True when every thread has modulus 1 within [`TORUS_TOL`].
    pub fn is_on_torus(&self) -> bool {
        self.is_on_torus_within(T::lit(TORUS_TOL))
    }

    pub fn is_on_torus_within(&self, tol: T) -> bool {
        self.amps.iter().all(|z| (z.norm() - T::one()).abs() <= tol)
    }
}
