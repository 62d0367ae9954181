//! Circuit quantization against lumped-element oracles, limits and the
//! inverse fit.

use fmqrm_core::circuit::{
    derive_energies, energy_to_angular, fit_circuit, kerr_coefficient, map_to_model, reduced_flux_quantum_sq,
    CircuitParams, TIME_UNIT,
};
use fmqrm_core::presets::{self, UnitReading};

const ORACLE_REL_TOL: f64 = 1e-10;
const FIT_REL_TOL: f64 = 1e-9;
/// Fitted constants of the first run, frozen to guard the inversion.
const FROZEN_FIT_REL_TOL: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn reference() -> CircuitParams {
    let mut p = presets::circuit_seed();
    p.e_j = p.e_jk * 0.02;
    p
}

#[test]
fn plasma_frequencies_match_lumped_oracle() {
    for p in [reference(), CircuitParams { n: 7, c_i: 9e-15, ..reference() }] {
        let d = derive_energies(&p).unwrap();
        let n = p.n as f64;
        let c_array = 2.0 * p.c_j + p.c_jk / n + p.c_i;
        let c_eff = c_array - p.c_i * p.c_i / (p.c_res + p.c_i);
        let l_eff = n * reduced_flux_quantum_sq() / p.e_jk;
        let oracle_kpo = TIME_UNIT / (l_eff * c_eff).sqrt();
        assert!(rel(d.omega_kpo, oracle_kpo) < ORACLE_REL_TOL, "{} vs {oracle_kpo}", d.omega_kpo);

        let c_res_eff = p.c_res + p.c_i - p.c_i * p.c_i / c_array;
        let oracle_lc = TIME_UNIT / (p.l_res * c_res_eff).sqrt();
        assert!(rel(d.omega_lc, oracle_lc) < ORACLE_REL_TOL, "{} vs {oracle_lc}", d.omega_lc);
    }
}

#[test]
fn no_coupling_capacitor_means_no_coupling() {
    let m = map_to_model(&CircuitParams { c_i: 0.0, ..reference() }).unwrap();
    assert_eq!(m.lambda, 0.0);
    let d = derive_energies(&CircuitParams { c_i: 0.0, ..reference() }).unwrap();
    assert_eq!(d.e_c_int, 0.0);
}

#[test]
fn no_squid_means_no_modulation() {
    let m = map_to_model(&CircuitParams { e_j: 0.0, ..reference() }).unwrap();
    assert_eq!(m.amplitude, 0.0);
}

#[test]
fn capacitance_scaling() {
    let s = 2.0;
    let a = map_to_model(&reference()).unwrap();
    let b = map_to_model(&reference().scale_capacitances(s)).unwrap();
    let da = derive_energies(&reference()).unwrap();
    let db = derive_energies(&reference().scale_capacitances(s)).unwrap();
    let inv_root = 1.0 / s.sqrt();
    assert!(rel(db.omega_kpo, da.omega_kpo * inv_root) < ORACLE_REL_TOL);
    assert!(rel(b.omega_c, a.omega_c * inv_root) < ORACLE_REL_TOL);
    assert!(rel(b.lambda, a.lambda * inv_root) < ORACLE_REL_TOL);
    assert!(rel(b.amplitude, a.amplitude * inv_root) < ORACLE_REL_TOL);
    assert!(rel(b.delta_b, a.delta_b / s) < ORACLE_REL_TOL);
}

#[test]
fn kerr_term_is_charging_energy_over_two_n_squared() {
    for n in [1, 4, 10] {
        let p = CircuitParams { n, ..reference() };
        let d = derive_energies(&p).unwrap();
        let nn = n as f64;
        assert!(rel(kerr_coefficient(&p, &d), -d.e_c_phi / (2.0 * nn * nn)) < ORACLE_REL_TOL);
        let m = map_to_model(&p).unwrap();
        assert!(rel(m.delta_b, energy_to_angular(d.e_c_phi) / (nn * nn)) < ORACLE_REL_TOL);
        assert!(rel(m.omega0 + m.delta_b, d.omega_kpo) < ORACLE_REL_TOL);
    }
}

#[test]
fn long_array_shrinks_anharmonicity() {
    let base = map_to_model(&reference()).unwrap();
    let long = map_to_model(&CircuitParams { n: 400, ..reference() }).unwrap();
    assert!(long.delta_b < base.delta_b * 1e-3);
    assert!(long.delta_b / long.omega0 < 1e-4);
}

#[test]
fn invalid_circuits_are_rejected() {
    assert!(derive_energies(&CircuitParams { c_j: 0.0, ..reference() }).is_err());
    assert!(derive_energies(&CircuitParams { n: 0, ..reference() }).is_err());
    assert!(derive_energies(&CircuitParams { e_j: -1.0, ..reference() }).is_err());
}

#[test]
fn fit_reproduces_targets() {
    let frozen = [
        (UnitReading::Mixed, 5.950_680_466_559_007e-12, 3.993_181_092_701_155e-8, 1.707_882_675_107_157_3e-15),
        (UnitReading::Angular, 5.951_397_177_331_069e-12, 3.998_913_827_790_187_4e-8, 2.716_229_999_314_808e-16),
    ];
    for (units, c_j, l_res, c_i) in frozen {
        let targets = presets::sec6_circuit_targets(units).unwrap();
        let fit = fit_circuit(&presets::circuit_seed(), &targets).unwrap();
        let m = map_to_model(&fit).unwrap();
        for (got, want) in [
            (m.omega0, targets.omega0),
            (m.omega_c, targets.omega_c),
            (m.lambda, targets.lambda),
            (m.amplitude, targets.amplitude),
            (m.omega_f, targets.omega_f),
        ] {
            assert!(rel(got, want) < FIT_REL_TOL, "{units:?}: {got} vs {want}");
        }
        assert!(rel(fit.c_i, c_i) < FROZEN_FIT_REL_TOL, "{units:?}: C_i {:e}", fit.c_i);
        assert!(rel(fit.c_j, c_j) < FROZEN_FIT_REL_TOL, "{units:?}: C_J {:e}", fit.c_j);
        assert!(rel(fit.l_res, l_res) < FROZEN_FIT_REL_TOL, "{units:?}: L_res {:e}", fit.l_res);
    }
}
