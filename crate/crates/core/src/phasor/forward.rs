use super::circuit::{CircuitSpec, GateLayer};
use super::gates::{mix_layer_in_place, normalize_in_place, shift_in_place};
use super::state::PhasorState;
use crate::error::{Result, VpcError};
use crate::scalar::Scalar;

/// One recorded layer: its index and the state entering it.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeEntry<T> {
    pub layer: usize,
    pub pre: PhasorState<T>,
}

/// Forward-pass record used by reverse-mode differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<T> {
    entries: Vec<TapeEntry<T>>,
    output: PhasorState<T>,
}

impl<T: Scalar> Tape<T> {
    pub fn entries(&self) -> &[TapeEntry<T>] {
        &self.entries
    }

    pub fn output(&self) -> &PhasorState<T> {
        &self.output
    }

    /// Re-runs the circuit from the first recorded state.
    pub fn replay(&self, spec: &CircuitSpec, params: &[T]) -> Result<PhasorState<T>> {
        let input = match self.entries.first() {
            Some(e) => e.pre.clone(),
            None => self.output.clone(),
        };
        Ok(forward(spec, params, &input, false)?.0)
    }
}

fn apply_layer<T: Scalar>(layer: GateLayer, n: usize, params: &[T], amps: &mut [num_complex::Complex<T>]) -> Result<()> {
    match layer {
        GateLayer::Shift { offset } => shift_in_place(amps, &params[offset..offset + n]),
        GateLayer::Mix(p) => mix_layer_in_place(amps, p),
        GateLayer::Normalize => normalize_in_place(amps)?,
    }
    Ok(())
}

/// Runs `input` through every layer of `spec` in order. With `record` set,
/// the returned tape holds the state entering each layer.
pub fn forward<T: Scalar>(
    spec: &CircuitSpec,
    params: &[T],
    input: &PhasorState<T>,
    record: bool,
) -> Result<(PhasorState<T>, Option<Tape<T>>)> {
    let n = spec.n_threads();
    if params.len() != spec.param_count() {
        return Err(VpcError::dim("forward params", spec.param_count(), params.len()));
    }
    if input.len() != n {
        return Err(VpcError::dim("forward input threads", n, input.len()));
    }
    let mut state = input.clone();
    let mut entries = Vec::with_capacity(if record { spec.layers().len() } else { 0 });
    for (i, &layer) in spec.layers().iter().enumerate() {
        if record {
            entries.push(TapeEntry {
                layer: i,
                pre: state.clone(),
            });
        }
        apply_layer(layer, n, params, state.amps_mut())?;
    }
    let tape = record.then(|| Tape {
        entries,
        output: state.clone(),
    });
    Ok((state, tape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::circuit::LayerKind;
    use num_complex::Complex;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    #[test]
    fn empty_circuit_is_identity() {
        let c = CircuitSpec::from_kinds(3, &[]).unwrap();
        let s = PhasorState::from_phases(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(forward(&c, &[], &s, false).unwrap().0, s);
    }

    #[test]
    fn zero_shift_is_identity() {
        let c = CircuitSpec::from_kinds(2, &[LayerKind::Shift]).unwrap();
        let s = PhasorState::from_phases(&[0.5, -1.0]).unwrap();
        assert_eq!(forward(&c, &[0.0, 0.0], &s, false).unwrap().0, s);
    }

    /// Straight-line 2x2 products for the N=2 single stack at theta = 0.
    #[test]
    fn single_stack_two_threads_matches_explicit_products() {
        let c = CircuitSpec::single_stack(2).unwrap();
        let s = PhasorState::from_phases(&[FRAC_PI_2, 0.0]).unwrap();
        let h = FRAC_1_SQRT_2;
        let (z0, z1) = (s.amps()[0], s.amps()[1]);
        // shift(0) is the identity; mix-even on (0,1); shift(0); mix-odd has no pairs at N=2.
        let a0 = Complex::new((z0.re - z1.im) * h, (z0.im + z1.re) * h);
        let a1 = Complex::new((z1.re - z0.im) * h, (z1.im + z0.re) * h);
        let out = forward(&c, &[0.0; 4], &s, false).unwrap().0;
        assert_eq!(out.amps(), &[a0, a1]);
        let (re, im) = (Complex::new(h, 0.0), Complex::new(0.0, h));
        let dense0 = re * z0 + im * z1;
        assert!((dense0 - out.amps()[0]).norm() < 1e-15);
    }

    #[test]
    fn tape_records_every_layer_and_replays() {
        let c = CircuitSpec::deep_stack(4, 2).unwrap();
        let params: Vec<f64> = (0..8).map(|k| 0.3 * k as f64 - 1.0).collect();
        let s = PhasorState::from_phases(&[0.1, 2.0, -1.0, 3.0]).unwrap();
        let (out, tape) = forward(&c, &params, &s, true).unwrap();
        let tape = tape.unwrap();
        assert_eq!(tape.entries().len(), c.layers().len());
        assert!(tape.entries().iter().enumerate().all(|(i, e)| e.layer == i));
        assert_eq!(tape.entries()[0].pre, s);
        assert_eq!(tape.output(), &out);
        assert_eq!(tape.replay(&c, &params).unwrap(), out);
    }

    #[test]
    fn dimension_errors() {
        let c = CircuitSpec::single_stack(3).unwrap();
        let s = PhasorState::from_phases(&[0.0; 3]).unwrap();
        assert!(forward(&c, &[0.0; 5], &s, false).is_err());
        let s2 = PhasorState::from_phases(&[0.0; 2]).unwrap();
        assert!(forward(&c, &[0.0; 6], &s2, false).is_err());
    }
}
