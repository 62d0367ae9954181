use std::f64::consts::PI;

use fmqrm_core::dynamics::{
    default_two_level_channels, fidelity_vs_x, propagate, three_level_leakage, uniform_times, Channel,
    ExactEvolution, Generator, LeakageSetup, PropagationConfig, SnapshotConvention,
};
use fmqrm_core::frames::EffectiveParams;
use fmqrm_core::hamiltonians::{anisotropic_rabi, TimeDependentOperator};
use fmqrm_core::hilbert::{AtomLevel, BasisLabel, HilbertSpace};
use fmqrm_core::presets;
use fmqrm_core::spectral::locate_crossing;

const E0: BasisLabel = BasisLabel::new(AtomLevel::E, 0);
const G3: BasisLabel = BasisLabel::new(AtomLevel::G, 3);
/// Values from the first run, quoted to six digits.
const FROZEN_ABS_TOL: f64 = 1e-5;

fn space() -> HilbertSpace {
    HilbertSpace::two_level(15).unwrap()
}

#[test]
fn resonant_transfer_under_the_effective_model() {
    let space = space();
    let template = presets::fig3().unwrap();
    let r = locate_crossing(&template, &space, None).unwrap();
    let p = template.with_omega_c(r.omega_c_star).unwrap();
    let evo = ExactEvolution::new(&anisotropic_rabi(&space, &p).unwrap()).unwrap();
    let times = uniform_times(2.0 * PI / r.splitting, 4000);
    let rec = evo.trajectory(Some(&space), &space.basis_state(E0).unwrap(), &times, &default_two_level_channels()).unwrap();
    let (max_g3, t_max) = rec.max_of(&Channel::Basis(G3).name()).unwrap();
    assert!(max_g3 >= 0.995);
    assert!((max_g3 - 0.999_19).abs() < 1e-4, "{max_g3}");
    // two-state oracle: full transfer after half a beat period
    assert!((t_max / (PI / r.splitting) - 1.0).abs() < 0.01, "{t_max}");
    let min_sum = (0..rec.times.len()).map(|k| rec.probabilities[0][k] + rec.probabilities[1][k]).fold(1.0, f64::min);
    assert!(min_sum >= 0.995, "{min_sum}");
    assert!(rec.max_norm_drift() < 1e-10);
}

#[test]
fn uncoupled_state_is_stationary() {
    let space = space();
    let p = EffectiveParams::new(1.0, 1.0 / 3.0, 0.0, 0.5).unwrap();
    let evo = ExactEvolution::new(&anisotropic_rabi(&space, &p).unwrap()).unwrap();
    let rec = evo
        .trajectory(Some(&space), &space.basis_state(E0).unwrap(), &uniform_times(1e4, 100), &default_two_level_channels())
        .unwrap();
    assert!(rec.probabilities[0].iter().all(|p| (p - 1.0).abs() < 1e-12));
}

#[test]
fn zero_generator_leaves_state_alone() {
    let space = HilbertSpace::two_level(4).unwrap();
    let op = TimeDependentOperator::zero(space.dim());
    let psi0 = space.basis_state(E0).unwrap();
    let cfg = PropagationConfig::rk4(10.0, 10).with_dt(0.1);
    let rec = propagate(&Generator::lab(&op), Some(&space), &psi0, &cfg, &[]).unwrap();
    assert_eq!(rec.final_state, psi0);
}

#[test]
fn fidelity_peaks_at_half() {
    let space = space();
    let sweep = fidelity_vs_x(&presets::fig6_xs(), presets::LAMBDA, &space, SnapshotConvention::FirstMaximum).unwrap();
    let (x, f) = sweep.peak().unwrap();
    assert!((x - 0.5).abs() < 1e-12, "peak at {x}");
    assert!(f >= 0.99);
}

#[test]
fn three_level_leakage_reference_values() {
    let setup = LeakageSetup::default();
    let m = three_level_leakage(true, &setup).unwrap();
    assert!((m.max_g3() - 0.999_196).abs() < FROZEN_ABS_TOL, "{}", m.max_g3());
    assert!(m.max_f() < 1e-8, "{:e}", m.max_f());
    let u = three_level_leakage(false, &setup).unwrap();
    assert!((u.max_g3() - 0.021_379).abs() < FROZEN_ABS_TOL, "{}", u.max_g3());
    assert!(u.two_level_max >= 0.9);
}
