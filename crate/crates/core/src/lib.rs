//! Variational phasor circuits: phase-native classifiers built from trainable
//! phase shifts, fixed beam-splitter mixing and pull-back normalization on the
//! unit-circle torus.
//!
//! The circuit, gradient, readout and encoding code is generic over the
//! [`Scalar`] type (`f32` or `f64`); the data pipeline and training loops run in
//! `f64`. Concrete aliases for the common `f64` case live at the crate root.

pub mod autodiff;
pub mod datagen;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod phasor;
pub mod readout;
pub mod scalar;
pub mod train;

#[cfg(test)]
extern crate self as vpc_core;
#[cfg(test)]
#[path = "../tests/common/mod.rs"]
mod common;
#[cfg(test)]
mod properties;

pub use error::{Result, VpcError};
pub use phasor::{Builtin, CircuitSpec, GateLayer, LayerKind, Parity};
pub use scalar::Scalar;

pub type PhasorState64 = phasor::PhasorState<f64>;
pub type PhasorState32 = phasor::PhasorState<f32>;
pub type Tape64 = phasor::Tape<f64>;
pub type Cotangent64 = autodiff::Cotangent<f64>;
pub type ProbVector64 = readout::ProbVector<f64>;
