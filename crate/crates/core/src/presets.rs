//! Named operating points. Closed-system presets are in units of the
//! effective atomic frequency `ω₀ = 1`; the `sec6` preset is in rad/ns.

use alloc::vec::Vec;

use crate::analytics::resonance_position;
use crate::circuit::{CircuitParams, CircuitTargets, FluxDrive, FLUX_QUANTUM};
use crate::dynamics::LeakageSetup;
use crate::frames::{EffectiveParams, LabFrameParams};
use crate::hilbert::DEFAULT_FOCK_CUTOFF;
use crate::open_system::{DissipationParams, FluxSetup, MasterMethod};
use crate::Result;

pub const LAMBDA: f64 = 0.01;
pub const X: f64 = 0.5;
/// Lab atomic frequency in units of the effective one.
pub const OMEGA0_LAB: f64 = 100.0;

/// Operating point `λ = 0.01`, `x = 0.5` with the cavity at the second-order
/// resonance estimate.
pub fn fig3() -> Result<EffectiveParams> {
    EffectiveParams::new(1.0, resonance_position(LAMBDA, X), LAMBDA, X)
}

/// Coupling strengths of the overlap scan.
pub const FIG4_LAMBDAS: [f64; 5] = [0.01, 0.03, 0.05, 0.08, 0.1];

/// Desk-scale coupling of the rotating-frame dynamics runs.
pub const FIG5_DESK_LAMBDA: f64 = 0.03;
/// Cavity frequency quoted for the full-length run.
pub const FIG5_QUOTED_OMEGA_C: f64 = 0.3335153;
/// Horizon of the frame-equivalence check.
pub const FRAME_EQUIVALENCE_T: f64 = 100.0;

/// Modulation depths of the fidelity sweep.
pub fn fig6_xs() -> Vec<f64> {
    (0..=20).map(|k| 0.3 + 0.02 * k as f64).collect()
}

/// Couplings of the splitting comparison, `0.005 … 0.1` in steps of 0.005.
pub fn fig7_lambdas() -> Vec<f64> {
    (1..=20).map(|k| 0.005 * k as f64).collect()
}

/// Relaxation rates of the flux runs, `0.1 Ω₀`.
pub const FIG9_RATE: f64 = 0.1 * OMEGA0_LAB;
/// Modulation frequencies of the flux runs: off, near `2Ω₀`, `5Ω₀`.
pub const FIG9_OMEGA_F: [f64; 3] = [0.0, 198.0, 500.0];
pub const FIG9_T_FINAL: f64 = 300.0;

/// Flux run at modulation frequency `omega_f` (0 for none) with `A = x ω_f`.
/// The cavity is the same in every case: tuned to the three-photon
/// resonance of the `ω_f = 198` case.
pub fn fig9(omega_f: f64) -> Result<FluxSetup> {
    let omega_c = FIG9_OMEGA_F[1] / 2.0 + resonance_position(LAMBDA, X);
    let lab = if omega_f > 0.0 {
        LabFrameParams::new(OMEGA0_LAB, omega_c, LAMBDA, X * omega_f, omega_f)?
    } else {
        LabFrameParams::unmodulated(OMEGA0_LAB, omega_c, LAMBDA)?
    };
    Ok(FluxSetup {
        lab,
        dissipation: DissipationParams::new(FIG9_RATE, FIG9_RATE)?,
        fock_cutoff: DEFAULT_FOCK_CUTOFF,
        t_final: FIG9_T_FINAL,
        samples: 2000,
        method: MasterMethod::Stroboscopic,
        dt: None,
    })
}

/// How the quoted GHz/MHz values become angular rates in rad/ns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitReading {
    /// GHz values taken as angular rates; MHz values (coupling and decay
    /// rates) as ordinary frequencies, multiplied by 2π.
    Mixed,
    /// Every value taken as an angular rate.
    Angular,
}

impl UnitReading {
    pub fn name(self) -> &'static str {
        match self {
            UnitReading::Mixed => "mixed",
            UnitReading::Angular => "angular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mixed" => Some(UnitReading::Mixed),
            "angular" => Some(UnitReading::Angular),
            _ => None,
        }
    }

    fn small_rate(self, mhz: f64) -> f64 {
        let per_ns = mhz * 1e-3;
        match self {
            UnitReading::Mixed => 2.0 * core::f64::consts::PI * per_ns,
            UnitReading::Angular => per_ns,
        }
    }
}

pub const SEC6_OMEGA_C_GHZ: f64 = 5.0;
pub const SEC6_OMEGA0_GHZ: f64 = 5.066;
pub const SEC6_OMEGA_F_GHZ: f64 = 9.93;
pub const SEC6_LAMBDA_MHZ: f64 = 0.198;
pub const SEC6_RATE_MHZ: f64 = 1.98;
/// Quoted steady flux, Hz.
pub const SEC6_FLUX_HZ: f64 = 60.0;
/// Flux runs last this many relaxation times `1/κ`.
pub const SEC6_RELAXATION_TIMES: f64 = 20.0;

/// Model rates of the circuit proposal, rad/ns.
pub fn sec6_lab(units: UnitReading) -> Result<LabFrameParams> {
    LabFrameParams::new(
        SEC6_OMEGA0_GHZ,
        SEC6_OMEGA_C_GHZ,
        units.small_rate(SEC6_LAMBDA_MHZ),
        X * SEC6_OMEGA_F_GHZ,
        SEC6_OMEGA_F_GHZ,
    )
}

pub fn sec6(units: UnitReading) -> Result<FluxSetup> {
    let rate = units.small_rate(SEC6_RATE_MHZ);
    Ok(FluxSetup {
        lab: sec6_lab(units)?,
        dissipation: DissipationParams::new(rate, rate)?,
        fock_cutoff: DEFAULT_FOCK_CUTOFF,
        t_final: SEC6_RELAXATION_TIMES / rate,
        samples: 2000,
        method: MasterMethod::Stroboscopic,
        dt: None,
    })
}

/// Flux per model time unit (ns) to Hz.
pub fn flux_to_hz(flux: f64) -> f64 {
    flux / crate::circuit::TIME_UNIT
}

pub fn sec6_circuit_targets(units: UnitReading) -> Result<CircuitTargets> {
    let lab = sec6_lab(units)?;
    Ok(CircuitTargets {
        omega0: lab.omega0,
        omega_c: lab.omega_c,
        lambda: lab.lambda,
        amplitude: lab.amplitude(),
        omega_f: lab.omega_f(),
    })
}

/// Starting point of the circuit inversion: a four-junction array at
/// `E_JK/h = 200 GHz` with picofarad-scale capacitances.
pub fn circuit_seed() -> CircuitParams {
    CircuitParams {
        e_j: 0.0,
        c_j: 5e-12,
        e_jk: crate::circuit::energy_from_ghz(200.0),
        c_jk: 50e-15,
        n: 4,
        l_res: 40e-9,
        c_res: 1e-12,
        c_i: 2e-15,
        phi0: FLUX_QUANTUM,
        flux_drive: FluxDrive { amplitude: 0.0, phase_rate: 0.0 },
    }
}

/// Three-level leakage comparison.
pub fn three_level() -> LeakageSetup {
    LeakageSetup::default()
}

/// Names accepted by [`describe`].
pub const NAMES: [&str; 9] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig9", "sec6", "three-level", "circuit"];

/// One-line description of a named preset.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig3" => "spectrum near the three-photon crossing and its location (lambda = 0.01, x = 0.5)",
        "fig4" => "overlaps of the crossing eigenstates with |e,0> and |g,3> versus lambda",
        "fig5" => "Rabi oscillation |e,0> -> |g,3> under the anisotropic Rabi model and the rotating-frame model",
        "fig6" => "fidelity of |g,3> at a fixed snapshot time versus modulation depth x",
        "fig7" => "numeric versus second-order analytic splitting over lambda",
        "fig9" => "output photon flux with no drive, omega_f = 1.98 Omega0 and omega_f = 5 Omega0",
        "sec6" => "steady output flux at the circuit-scale parameters",
        "three-level" => "leakage into the third atomic level with and without modulation",
        "circuit" => "circuit constants tuned to the circuit-scale model parameters",
        _ => return None,
    })
}
