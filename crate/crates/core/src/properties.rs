//! Property suite for the algebraic laws, checked against the dense oracle.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use vpc_core::autodiff::{backward, Cotangent};
use vpc_core::encoding::encode_values;
use vpc_core::phasor::{apply_mix_pair, apply_normalize, forward, PhasorState};
use vpc_core::readout::softmax;
use vpc_core::{CircuitSpec, LayerKind};

use crate::common::{oracle_forward, oracle_grad};

fn unitary_kind() -> impl Strategy<Value = LayerKind> {
    prop_oneof![Just(LayerKind::Shift), Just(LayerKind::MixEven), Just(LayerKind::MixOdd)]
}

fn any_kind() -> impl Strategy<Value = LayerKind> {
    prop_oneof![
        Just(LayerKind::Shift),
        Just(LayerKind::MixEven),
        Just(LayerKind::MixOdd),
        Just(LayerKind::Normalize)
    ]
}

/// Circuit, parameters and torus input.
fn case(n: std::ops::RangeInclusive<usize>, kind: BoxedStrategy<LayerKind>) -> impl Strategy<Value = (CircuitSpec, Vec<f64>, Vec<f64>)> {
    (n, prop::collection::vec(kind, 0..=6)).prop_flat_map(|(n, kinds)| {
        let spec = CircuitSpec::from_kinds(n, &kinds).unwrap();
        let p = spec.param_count();
        (
            Just(spec),
            prop::collection::vec(-PI..PI, p),
            prop::collection::vec(-PI..PI, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unitary_circuits_keep_the_norm((spec, params, phases) in case(1..=8, unitary_kind().boxed())) {
        let z = PhasorState::from_phases(&phases).unwrap();
        let (out, _) = forward(&spec, &params, &z, false).unwrap();
        prop_assert!((out.norm() - (spec.n_threads() as f64).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn mix_magnitude_law(a in -PI..PI, b in -PI..PI) {
        let z = PhasorState::from_phases(&[a, b]).unwrap();
        let out = apply_mix_pair(&z, 0, 1).unwrap();
        prop_assert!((out.amps()[0].norm_sqr() - (1.0 + (a - b).sin())).abs() < 1e-12);
        prop_assert!((out.amps()[1].norm_sqr() - (1.0 - (a - b).sin())).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent_and_keeps_phases(
        amps in prop::collection::vec((0.01f64..10.0, -PI..PI), 1..10)
    ) {
        let z = PhasorState::from_amps(amps.iter().map(|&(r, t)| C::from_polar(r, t)).collect()).unwrap();
        let once = apply_normalize(&z).unwrap();
        let twice = apply_normalize(&once).unwrap();
        prop_assert!(once.is_on_torus());
        for ((a, b), c) in once.amps().iter().zip(twice.amps()).zip(z.amps()) {
            prop_assert!((a - b).norm() < 1e-15);
            prop_assert!((a.arg() - c.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_oracle_forward_and_backward(
        (spec, params, phases) in case(1..=4, unitary_kind().boxed()),
        g in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
    ) {
        let z = PhasorState::from_phases(&phases).unwrap();
        let (out, tape) = forward(&spec, &params, &z, true).unwrap();
        let want = oracle_forward(&spec, &params, z.amps());
        for (a, b) in out.amps().iter().zip(&want) {
            prop_assert!((a - b).norm() < 1e-10);
        }
        let n = spec.n_threads();
        let cot = Cotangent::from_pairs(&g[..n]);
        let grad = backward(&tape.unwrap(), &spec, &params, &cot).unwrap();
        let want = oracle_grad(&spec, &params, z.amps(), &cot.d);
        for (a, b) in grad.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shifts_are_two_pi_periodic(
        (spec, params, phases) in case(1..=6, any_kind().boxed()),
        pick in any::<prop::sample::Index>(),
    ) {
        prop_assume!(!params.is_empty());
        let z = PhasorState::from_phases(&phases).unwrap();
        let Ok((base, _)) = forward(&spec, &params, &z, false) else { return Ok(()) };
        let mut moved = params.clone();
        moved[pick.index(params.len())] += 2.0 * PI;
        let (out, _) = forward(&spec, &moved, &z, false).unwrap();
        for (a, b) in out.amps().iter().zip(base.amps()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn softmax_ignores_constant_shifts(
        logits in prop::collection::vec(-10.0f64..10.0, 1..8),
        c in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
        let q = softmax(&shifted);
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.probs.iter().zip(&q.probs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn encoding_is_affine_invariant(
        x in prop::collection::vec(-5.0f64..5.0, 2..16),
        a in 1e-6f64..1e3,
        b in -1e3f64..1e3,
    ) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let e = encode_values(&x).unwrap();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let f = encode_values(&y).unwrap();
        for (p, q) in e.phases().iter().zip(f.phases()) {
            prop_assert!((p - q).abs() < 1e-10, "{p} vs {q}");
        }
    }

    #[test]
    fn normalize_layers_return_to_the_torus(
        (spec, params, phases) in case(2..=8, any_kind().boxed()).prop_flat_map(|(spec, _, phases)| {
            let mut kinds: Vec<LayerKind> = spec.layers().iter().map(|l| l.kind()).collect();
            kinds.push(LayerKind::Normalize);
            let spec = CircuitSpec::from_kinds(spec.n_threads(), &kinds).unwrap();
            let p = spec.param_count();
            (Just(spec), prop::collection::vec(-PI..PI, p), Just(phases))
        }),
    ) {
        let z = PhasorState::from_phases(&phases).unwrap();
        if let Ok((out, _)) = forward(&spec, &params, &z, false) {
            prop_assert!(out.is_on_torus());
        }
    }
}
