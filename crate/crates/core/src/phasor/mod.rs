//! Phasor states, gate primitives, circuit descriptions and the forward pass.

mod circuit;
mod forward;
mod gates;
mod state;

pub use circuit::{Builtin, CircuitSpec, GateLayer, LayerKind};
pub use forward::{forward, Tape, TapeEntry};
pub use gates::{apply_mix_layer, apply_mix_pair, apply_normalize, apply_shift, Parity};
pub use state::{PhasorState, TORUS_TOL};

pub(crate) use gates::{check_pullback, cis};
