//! Scalar abstraction shared by the circuit, gradient and readout code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type the phasor kernels are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Threshold below which a thread modulus is treated as zero by the pull-back.
    fn pullback_eps() -> Self;
}

impl Scalar for f32 {
    fn pullback_eps() -> Self {
        1e-12
    }
}

impl Scalar for f64 {
    fn pullback_eps() -> Self {
        1e-12
    }
}
