//! Property tests of the simulator, gradients, training loop and bounds.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use qnn_stability::bounds::{noisy_stability, stability_const, stability_general, BoundQuery};
use qnn_stability::circuit::{
    assemble_unitary, build_hea, qnn_forward, spectral_distance, Circuit, EncodedInput,
    ParameterVector,
};
use qnn_stability::grad::{finite_diff_grad, l2_norm, param_shift_grad, FD_STEP};
use qnn_stability::qcore::{
    apply_gate, evolve, evolve_noisy_inspect, Axis, DensityMatrix, Gate, Observable, QuantumState,
    Statevector,
};
use qnn_stability::train::{IndexSampler, SamplingScheme, StepSchedule};

fn state(n: usize) -> impl Strategy<Value = Statevector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map("non-zero", |v| {
        let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| {
            Statevector::from_amplitudes(
                v.iter()
                    .map(|(a, b)| Complex64::new(a / norm, b / norm))
                    .collect(),
            )
            .unwrap()
        })
    })
}

fn hea_case() -> impl Strategy<Value = (Circuit, ParameterVector, ParameterVector, EncodedInput)> {
    (1usize..=4, 1usize..=3).prop_flat_map(|(n, l)| {
        let k = 2 * n * l;
        (
            Just(build_hea(n, l).unwrap()),
            prop::collection::vec(-PI..PI, k),
            prop::collection::vec(-PI..PI, k),
            prop::collection::vec(0.0..=PI, n),
        )
            .prop_map(|(c, a, b, x)| {
                (
                    c,
                    ParameterVector::new(a),
                    ParameterVector::new(b),
                    EncodedInput::new(x).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm(psi in state(3), axis in 0usize..3, q in 0usize..3, angle in -PI..PI) {
        let ax = [Axis::X, Axis::Y, Axis::Z][axis];
        let out = apply_gate(&psi, &Gate::trainable(ax, q, 0), Some(angle)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        let out = apply_gate(&psi, &Gate::cnot(q, (q + 1) % 3), None).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_and_density_expectations_agree(psi in state(3), q in 0usize..3) {
        let obs = Observable::z(3, q);
        let a = psi.expectation(&obs).unwrap();
        let b = DensityMatrix::from_pure(&psi).unwrap().expectation(&obs).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn unitary_columns_match_evolution((c, theta, _, _) in hea_case()) {
        prop_assume!(c.n_qubits() <= 3);
        let u = assemble_unitary(&c, &theta).unwrap();
        let dim = u.nrows();
        let id = &u.adjoint() * &u;
        prop_assert!((id - DMatrix::<Complex64>::identity(dim, dim)).norm() < 1e-12);
        let psi = Statevector::basis(c.n_qubits(), dim - 1).unwrap();
        let col = evolve(&psi, &c, &theta).unwrap();
        for (r, a) in col.amplitudes().iter().enumerate() {
            prop_assert!((u[(r, dim - 1)] - a).norm() < 1e-12);
        }
    }

    #[test]
    fn density_stays_physical(psi in state(2), theta in prop::collection::vec(-PI..PI, 8), p in 0.0f64..1.0) {
        let c = build_hea(2, 2).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        evolve_noisy_inspect(&rho, &c, &ParameterVector::new(theta), p, |r| {
            r.check_invariants(1e-10)
        }).unwrap();
    }

    #[test]
    fn output_lipschitz_and_range((c, a, b, x) in hea_case()) {
        let obs = Observable::z(c.n_qubits(), 0);
        let fa = qnn_forward(&c, &a, &x, &obs, 0.0).unwrap();
        let fb = qnn_forward(&c, &b, &x, &obs, 0.0).unwrap();
        let k = c.n_params() as f64;
        prop_assert!(fa.abs() <= 1.0 + 1e-12);
        prop_assert!((fa - fb).abs() <= k.sqrt() * a.distance(&b) + 1e-12);
    }

    #[test]
    fn unitary_distance_chain((c, a, b, _) in hea_case()) {
        let d = spectral_distance(&c, &a, &b).unwrap();
        let mid: f64 = a.iter().zip(b.iter()).map(|(u, v)| (2.0 * ((u - v) / 4.0).sin()).abs()).sum();
        let k = c.n_params() as f64;
        prop_assert!(d <= mid + 1e-12);
        prop_assert!(mid <= k.sqrt() / 2.0 * a.distance(&b) + 1e-12);
    }

    #[test]
    fn shift_rule_matches_finite_differences((c, a, _, x) in hea_case(), noisy in any::<bool>()) {
        let obs = Observable::z(c.n_qubits(), 0);
        let p = if noisy { 0.1 } else { 0.0 };
        let g = param_shift_grad(&c, &a, &x, &obs, p).unwrap();
        let fd = finite_diff_grad(&c, &a, &x, &obs, p, FD_STEP).unwrap();
        for (u, v) in g.iter().zip(&fd) {
            prop_assert!((u - v).abs() < 1e-6);
        }
        let q = (1.0 - p).powi(c.n_gates() as i32);
        prop_assert!(l2_norm(&g) <= q * (2.0 * c.n_params() as f64).sqrt() + 1e-12);
    }

    #[test]
    fn permutation_epochs_cover_every_index(seed in any::<u64>(), m in 1usize..20) {
        let idx: Vec<usize> = IndexSampler::new(seed, SamplingScheme::RandomPermutation, m).take(3 * m).collect();
        for epoch in idx.chunks(m) {
            let mut e = epoch.to_vec();
            e.sort_unstable();
            prop_assert_eq!(e, (0..m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn bounds_shrink_with_m_and_grow_with_t(
        eta in 1e-5f64..0.05,
        t in 1usize..400,
        m in 1usize..10_000,
        k in 1usize..40,
    ) {
        let q = |m: usize, t: usize| BoundQuery::new(4.0, 2.0, 4.0, k, 1.0, m, t, StepSchedule::Constant { eta });
        let base = stability_general(&q(m, t)).unwrap();
        prop_assert!(base.value > 0.0);
        let half = stability_general(&q(2 * m, t)).unwrap();
        if !base.overflow {
            prop_assert!((half.value * 2.0 - base.value).abs() <= 1e-12 * base.value);
            prop_assert!(stability_general(&q(m, t + 1)).unwrap().value > base.value);
            // equal up to rounding once (1+ηκ)^T dwarfs the missing 1
            prop_assert!(base.value <= stability_const(&q(m, t)).unwrap().value * (1.0 + 1e-12));
        }
        prop_assert_eq!(noisy_stability(&q(m, t)).unwrap(), stability_const(&q(m, t)).unwrap());
    }
}

#[test]
fn noisy_forward_closed_form_example() {
    // RY(θ) on one qubit, three gates of noise 0.1: q = 0.9³ = 0.729
    let mut c = Circuit::new(1).unwrap();
    for _ in 0..3 {
        c.push_trainable(Axis::Y, 0).unwrap();
    }
    let theta = ParameterVector::new(vec![0.2, 0.3, -0.1]);
    let x = EncodedInput::new(vec![0.0]).unwrap();
    let obs = Observable::z(1, 0);
    let noisy = qnn_forward(&c, &theta, &x, &obs, 0.1).unwrap();
    assert_abs_diff_eq!(noisy, 0.729 * 0.4f64.cos(), epsilon = 1e-12);
}
