//! Crossing location, splitting and the closed forms, checked against
//! frozen values and an independent perturbative oracle.

use fmqrm_core::analytics::{analytic_report, rabi_frequency_eff, resonance_position};
use fmqrm_core::frames::{bessel_j, EffectiveParams};
use fmqrm_core::hamiltonians::{anisotropic_rabi, effective_2x2};
use fmqrm_core::hilbert::HilbertSpace;
use fmqrm_core::linalg::eig_hermitian;
use fmqrm_core::presets;
use fmqrm_core::spectral::{locate_crossing, log_log_slope, splitting_vs_lambda};

/// First run of `locate_crossing` at λ = 0.01, x = 0.5, N = 15.
const FROZEN_OMEGA_C_STAR: f64 = 0.333_515_300_869;
const FROZEN_SPLITTING: f64 = 2.350_286_364_86e-6;
const FROZEN_REL_TOL: f64 = 1e-8;

fn space() -> HilbertSpace {
    HilbertSpace::two_level(15).unwrap()
}

#[test]
fn crossing_at_the_reference_point() {
    let r = locate_crossing(&presets::fig3().unwrap(), &space(), None).unwrap();
    assert!((r.omega_c_star / FROZEN_OMEGA_C_STAR - 1.0).abs() < FROZEN_REL_TOL, "{}", r.omega_c_star);
    assert!((r.splitting / FROZEN_SPLITTING - 1.0).abs() < 1e-6, "{:e}", r.splitting);
    assert!(r.f_b >= 0.99 && r.f_c >= 0.99);
    assert!(r.orthogonality_defect < 1e-12);
    assert_eq!(r.upper_index, r.lower_index + 1);
}

#[test]
fn closed_forms_agree_with_numerics() {
    let space = space();
    let report = analytic_report(1.0, presets::LAMBDA, presets::X).unwrap();
    let r = locate_crossing(&presets::fig3().unwrap(), &space, None).unwrap();
    assert!((report.omega_c_prime_ratio / r.omega_c_star - 1.0).abs() < 1e-5);
    let at = presets::fig3().unwrap().with_omega_c(r.omega_c_star).unwrap();
    let analytic = 2.0 * rabi_frequency_eff(&at).unwrap();
    assert!((analytic / r.splitting - 1.0).abs() < 0.02);
}

#[test]
fn resonance_position_oracle() {
    // ω_c' = ω₀/3 + 2(J₀² + J₋₁²/2)λ²/ω₀, evaluated independently
    for (lambda, x) in [(0.01, 0.5), (0.02, 0.3), (0.005, 1.0)] {
        let j0 = bessel_j(0, x).unwrap();
        let jm = bessel_j(-1, x).unwrap();
        let oracle = 1.0 / 3.0 + 2.0 * (j0 * j0 + 0.5 * jm * jm) * lambda * lambda;
        assert!((resonance_position(lambda, x) - oracle).abs() < 1e-16);
    }
}

#[test]
fn effective_two_level_reduction_matches_the_full_crossing() {
    // the 2x2 effective Hamiltonian at the numerical resonance has nearly the
    // same splitting as the full model
    let space = space();
    let p = presets::fig3().unwrap();
    let r = locate_crossing(&p, &space, None).unwrap();
    let at = p.with_omega_c(r.omega_c_star).unwrap();
    let h2 = effective_2x2(&at);
    let eig = eig_hermitian(&h2).unwrap();
    let off = h2[(0, 1)].norm();
    assert!((2.0 * off / (2.0 * rabi_frequency_eff(&at).unwrap()) - 1.0).abs() < 1e-12);
    assert!(eig.values[1] - eig.values[0] >= 2.0 * off * (1.0 - 1e-12));
}

#[test]
fn splitting_scales_as_lambda_cubed() {
    let lambdas: Vec<f64> = presets::fig7_lambdas().into_iter().filter(|&l| l < 0.05).collect();
    let rows = splitting_vs_lambda(&lambdas, presets::X, 1.0, &space()).unwrap();
    assert!(rows.iter().all(|r| r.percent_difference < 3.0), "{rows:?}");
    let slope = log_log_slope(&lambdas, &rows.iter().map(|r| r.numeric).collect::<Vec<_>>());
    assert!((slope - 3.0).abs() < 0.05, "slope {slope}");
    // the difference grows monotonically with the coupling
    assert!(rows.windows(2).all(|w| w[1].percent_difference > w[0].percent_difference));
}

#[test]
fn overlaps_fall_monotonically_with_coupling() {
    let space = space();
    let mut last = (1.0, 1.0);
    for lambda in presets::FIG4_LAMBDAS {
        let t = EffectiveParams::new(1.0, 1.0 / 3.0, lambda, presets::X).unwrap();
        let r = locate_crossing(&t, &space, None).unwrap();
        assert!(r.f_b < last.0 && r.f_c < last.1, "lambda {lambda}: {} {}", r.f_b, r.f_c);
        last = (r.f_b, r.f_c);
    }
}

#[test]
fn decoupled_limit_has_no_gap() {
    // J₋₁(x) = 0 removes the counter-rotating coupling: no three-photon
    // element, the levels cross
    let x = fmqrm_core::frames::J1_FIRST_ZERO;
    let p = EffectiveParams::new(1.0, 1.0 / 3.0, 0.01, x).unwrap();
    let r = locate_crossing(&p, &space(), None).unwrap();
    assert!(r.splitting < 1e-10, "{:e}", r.splitting);
    let h = anisotropic_rabi(&space(), &p.with_omega_c(r.omega_c_star).unwrap()).unwrap();
    assert!(eig_hermitian(&h).is_ok());
}

#[test]
fn fock_doubling_leaves_the_crossing_unchanged() {
    let p = presets::fig3().unwrap();
    let a = locate_crossing(&p, &space(), None).unwrap();
    let b = locate_crossing(&p, &HilbertSpace::two_level(30).unwrap(), None).unwrap();
    assert!((a.omega_c_star / b.omega_c_star - 1.0).abs() < 1e-3);
    assert!((a.splitting / b.splitting - 1.0).abs() < 1e-3);
    assert!((a.f_b / b.f_b - 1.0).abs() < 1e-3);
}
