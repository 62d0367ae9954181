use fmqrm_core::dynamics::{propagate, ExactEvolution, Generator, PropagationConfig, NORM_TOLERANCE};
use fmqrm_core::frames::{bessel_j, bessel_j_orders, Modulation, RotatingFrame, BESSEL_X_LIMIT};
use fmqrm_core::hamiltonians::TimeDependentOperator;
use fmqrm_core::hilbert::HilbertSpace;
use fmqrm_core::linalg::{c64, eig_hermitian, expm_hermitian};
use fmqrm_core::{ComplexMatrix, StateVector};
use proptest::prelude::*;

const RECONSTRUCTION_TOL: f64 = 1e-10;
const BESSEL_COMPLETENESS_TOL: f64 = 1e-12;
const BESSEL_SERIES_TOL: f64 = 1e-11;

fn matrix_from(n: usize, data: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| c64(data[2 * (i * n + j)], data[2 * (i * n + j) + 1]))
}

fn hermitian_from(n: usize, data: &[f64]) -> ComplexMatrix {
    let a = matrix_from(n, data);
    (&a + &a.adjoint()).scale_real(0.5)
}

fn hermitian() -> impl Strategy<Value = ComplexMatrix> {
    (2usize..14).prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |d| hermitian_from(n, &d)))
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-1.0f64..1.0, 2 * n)
        .prop_filter("nonzero", |d| d.iter().any(|v| v.abs() > 1e-3))
        .prop_map(move |d| StateVector((0..n).map(|i| c64(d[2 * i], d[2 * i + 1])).collect()).normalized())
}

/// Power series of `J_n(x)`, independent of the library's recurrence.
fn bessel_series(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs() as i32;
    let half = x / 2.0;
    let mut term = half.powi(m) / (1..=m).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..80 {
        term *= -half * half / (k as f64 * (k + m) as f64);
        sum += term;
    }
    if n < 0 && m % 2 == 1 {
        -sum
    } else {
        sum
    }
}

proptest! {
    #[test]
    fn eigen_decomposition_reconstructs(h in hermitian()) {
        let eig = eig_hermitian(&h).unwrap();
        prop_assert!(eig.reconstruct().max_abs_diff(&h) <= RECONSTRUCTION_TOL);
        let v = &eig.vectors;
        prop_assert!(v.adjoint().matmul(v).max_abs_diff(&ComplexMatrix::identity(h.rows())) <= RECONSTRUCTION_TOL);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = eig.values.iter().sum();
        prop_assert!((trace - h.trace().re).abs() <= RECONSTRUCTION_TOL);
        for k in 0..eig.dim() {
            let x = eig.vector(k);
            let hx = h.mul_vec(&x);
            let r = hx.iter().zip(&x).map(|(a, b)| (a - b * eig.values[k]).norm()).fold(0.0, f64::max);
            prop_assert!(r <= RECONSTRUCTION_TOL);
        }
    }

    #[test]
    fn exponential_is_unitary(h in hermitian(), t in -5.0f64..5.0) {
        let u = expm_hermitian(&h, c64(0.0, -t)).unwrap();
        let id = ComplexMatrix::identity(h.rows());
        prop_assert!(u.adjoint().matmul(&u).max_abs_diff(&id) <= 1e-12);
        let back = expm_hermitian(&h, c64(0.0, t)).unwrap();
        prop_assert!(u.matmul(&back).max_abs_diff(&id) <= 1e-12);
    }

    #[test]
    fn bessel_completeness(x in 0.0f64..BESSEL_X_LIMIT) {
        let j = bessel_j_orders(60, x).unwrap();
        let sum = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        prop_assert!((sum - 1.0).abs() <= BESSEL_COMPLETENESS_TOL);
        // generating function at t = 1: J_0 + 2 Σ J_2k = 1
        let even = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        prop_assert!((even - 1.0).abs() <= BESSEL_COMPLETENESS_TOL);
    }

    #[test]
    fn bessel_matches_power_series(x in 0.0f64..BESSEL_X_LIMIT, n in -12i32..=12) {
        let v = bessel_j(n, x).unwrap();
        prop_assert!((v - bessel_series(n, x)).abs() <= BESSEL_SERIES_TOL, "J_{}({}) = {} vs {}", n, x, v, bessel_series(n, x));
    }

    #[test]
    fn static_frame_round_trip(rates in prop::collection::vec(-50.0f64..50.0, 6), psi in state(6), t in -100.0f64..100.0) {
        let frame = RotatingFrame::static_rates(rates, None);
        let back = frame.from_lab(t, &frame.to_lab(t, &psi.0));
        for (a, b) in back.iter().zip(&psi.0) {
            prop_assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn co_moving_frame_round_trip(amp in 0.0f64..300.0, wf in 10.0f64..500.0, t in 0.0f64..50.0, psi in state(16)) {
        let space = HilbertSpace::two_level(7).unwrap();
        let frame = RotatingFrame::co_moving(&space, Some(Modulation { amplitude: amp, omega_f: wf }), 100.0).unwrap();
        let back = frame.to_lab(t, &frame.from_lab(t, &psi.0));
        for (a, b) in back.iter().zip(&psi.0) {
            prop_assert!((a - b).norm() <= 1e-14);
        }
        let p = frame.phase_factors(t);
        prop_assert!(p.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-14));
    }

    #[test]
    fn rk4_preserves_norm(h in hermitian(), seed in prop::collection::vec(-1.0f64..1.0, 28)) {
        let n = h.rows();
        let psi0 = StateVector((0..n).map(|i| c64(seed[2 * i], seed[2 * i + 1] + 0.1)).collect()).normalized();
        let op = TimeDependentOperator::from_static(h).unwrap();
        let dt = 0.04 / op.norm_bound().max(1e-3);
        let rec = propagate(&Generator::lab(&op), None, &psi0, &PropagationConfig::rk4(10.0, 50).with_dt(dt), &[]).unwrap();
        prop_assert!(rec.max_norm_drift() <= NORM_TOLERANCE, "drift {}", rec.max_norm_drift());
    }

    #[test]
    fn rk4_matches_exact_evolution(
        data in (2usize..7).prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, 2 * n * n + 2 * n).prop_map(move |d| (n, d)))
    ) {
        let (n, d) = data;
        let h = hermitian_from(n, &d);
        let psi0 = StateVector((0..n).map(|i| c64(d[2 * n * n + 2 * i], d[2 * n * n + 2 * i + 1] + 0.1)).collect()).normalized();
        let op = TimeDependentOperator::from_static(h.clone()).unwrap();
        let dt = 0.01 / op.norm_bound().max(1e-3);
        let rec = propagate(&Generator::lab(&op), None, &psi0, &PropagationConfig::rk4(5.0, 100).with_dt(dt), &[]).unwrap();
        let exact = ExactEvolution::new(&h).unwrap().state_at(&psi0, 5.0);
        let err = exact.0.iter().zip(&rec.final_state.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "rk4 vs exact {}", err);
    }
}

#[test]
fn bessel_reference_values() {
    // tabulated to 16 digits
    assert!((bessel_j(0, 1.0).unwrap() - 0.765_197_686_557_966_6).abs() < 1e-15);
    assert!((bessel_j(1, 1.0).unwrap() - 0.440_050_585_744_933_5).abs() < 1e-15);
    assert!(bessel_j(0, 2.404_825_557_695_773).unwrap().abs() < 1e-15);
    assert!((bessel_j(-1, 0.5).unwrap() + bessel_j(1, 0.5).unwrap()).abs() < 1e-16);
    assert!(bessel_j(0, BESSEL_X_LIMIT * 1.5).is_err());
}
