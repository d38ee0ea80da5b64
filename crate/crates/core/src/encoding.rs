//! Snapshot standardization and saturating phase encoding.

use crate::error::{Result, VpcError};
use crate::phasor::PhasorState;
use crate::scalar::Scalar;

/// Snapshots whose population standard deviation falls below this are rejected.
pub const MIN_STD: f64 = 1e-12;

/// Subtracts the mean and divides by the population (divide-by-N) standard deviation.
pub fn zscore<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    if values.len() < 2 {
        return Err(VpcError::InvalidInput(format!(
            "z-score needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(VpcError::InvalidInput("non-finite snapshot value".into()));
    }
    let n = T::from_usize(values.len()).expect("length fits scalar");
    let mean = values.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .fold(T::zero(), |a, b| a + b)
        / n;
    let std = var.sqrt();
    if !(std >= T::lit(MIN_STD)) {
        return Err(VpcError::ConstantSnapshot {
            std: std.to_f64().unwrap_or(0.0),
        });
    }
    Ok(values.iter().map(|&v| (v - mean) / std).collect())
}

/// `phi = pi * tanh(x)`, strictly inside (-pi, pi) for finite input.
pub fn phase_encode<T: Scalar>(normed: &[T]) -> Vec<T> {
    normed.iter().map(|&x| T::PI() * x.tanh()).collect()
}

/// Standardize, phase-encode and lift onto the torus.
pub fn encode_values<T: Scalar>(values: &[T]) -> Result<PhasorState<T>> {
    PhasorState::from_phases(&phase_encode(&zscore(values)?))
}
