//! Josephson-circuit quantization: a Kerr parametric oscillator (a DC SQUID
//! in series with an `N`-junction array) capacitively coupled to an LC
//! resonator. Circuit constants are SI; model parameters come out in angular
//! frequency units of rad/ns.

use alloc::format;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Magnetic flux quantum `h / 2e`, Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848_461_929_3e-15;
/// Seconds per model time unit (ns).
pub const TIME_UNIT: f64 = 1e-9;

/// Energy in joules to an angular frequency in rad/ns.
pub fn energy_to_angular(e: f64) -> f64 {
    e / HBAR * TIME_UNIT
}

/// Angular frequency in rad/ns to an energy in joules.
pub fn angular_to_energy(w: f64) -> f64 {
    w * HBAR / TIME_UNIT
}

/// Energy `E = h f` for an ordinary frequency `f` in GHz.
pub fn energy_from_ghz(f: f64) -> f64 {
    PLANCK * f * 1e9
}

/// `(Φ₀/2π)²`
pub fn reduced_flux_quantum_sq() -> f64 {
    let r = FLUX_QUANTUM / (2.0 * core::f64::consts::PI);
    r * r
}

/// Coefficient of `x^k` in the Maclaurin series of `cos x`.
pub fn cos_series_coefficient(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut fact = 1.0;
    for i in 2..=k {
        fact *= i as f64;
    }
    if (k / 2) % 2 == 0 { 1.0 / fact } else { -1.0 / fact }
}

/// External flux bias. The model sees `ω_f = phase_rate / 2` because the
/// SQUID potential depends on `φ_ex/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxDrive {
    /// Amplitude of `Φ_ex` in Wb. Recorded for reference; the modulation
    /// depth of the model comes from `E_J`.
    pub amplitude: f64,
    /// `dφ_ex/dt` in rad/ns.
    pub phase_rate: f64,
}

impl FluxDrive {
    pub fn omega_f(&self) -> f64 {
        self.phase_rate / 2.0
    }
}

/// Circuit constants: energies in J, capacitances in F, inductance in H.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitParams {
    pub e_j: f64,
    pub c_j: f64,
    pub e_jk: f64,
    pub c_jk: f64,
    pub n: u32,
    pub l_res: f64,
    pub c_res: f64,
    pub c_i: f64,
    pub phi0: f64,
    pub flux_drive: FluxDrive,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let strictly = [
            ("E_JK", self.e_jk),
            ("C_J", self.c_j),
            ("C_JK", self.c_jk),
            ("L_res", self.l_res),
            ("C_res", self.c_res),
            ("Phi0", self.phi0),
        ];
        for (name, v) in strictly {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be > 0, got {v:e}") });
            }
        }
        for (name, v) in [("E_J", self.e_j), ("C_i", self.c_i), ("flux_drive.phase_rate", self.flux_drive.phase_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {v:e}") });
            }
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter { name: "N", reason: "need at least one array junction".into() });
        }
        Ok(())
    }

    /// Every capacitance multiplied by `s`.
    pub fn scale_capacitances(&self, s: f64) -> Self {
        Self { c_j: self.c_j * s, c_jk: self.c_jk * s, c_res: self.c_res * s, c_i: self.c_i * s, ..*self }
    }
}

/// Quantities of the two-mode circuit Hamiltonian. Energies in J, effective
/// capacitances in J·s², frequencies in rad/ns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedCircuitEnergies {
    pub e_c_phi: f64,
    pub e_c_theta: f64,
    pub e_c_int: f64,
    pub e_l: f64,
    pub c_kpo: f64,
    pub c_an: f64,
    pub c_int: f64,
    pub omega_kpo: f64,
    pub omega_lc: f64,
    pub n0_phi: f64,
    pub phi_0: f64,
    pub n0_theta: f64,
    pub theta_0: f64,
}

pub fn derive_energies(c: &CircuitParams) -> Result<DerivedCircuitEnergies> {
    c.validate()?;
    let r = c.phi0 / (2.0 * core::f64::consts::PI);
    let r2 = r * r;
    let n = c.n as f64;
    let c_int = r2 * c.c_i;
    let c_kpo = r2 * (2.0 * c.c_j + c.c_jk / n + c.c_i);
    let c_an = r2 * (c.c_res + c.c_i);
    let det = c_kpo * c_an - c_int * c_int;
    if !(det > 0.0) {
        return Err(Error::KineticForm { determinant: det });
    }
    let h2 = HBAR * HBAR;
    let e_c_phi = h2 * c_an / (8.0 * det);
    let e_c_theta = h2 * c_kpo / (8.0 * det);
    let e_c_int = h2 * c_int / (8.0 * det);
    let e_l = r2 / c.l_res;
    Ok(DerivedCircuitEnergies {
        e_c_phi,
        e_c_theta,
        e_c_int,
        e_l,
        c_kpo,
        c_an,
        c_int,
        omega_kpo: energy_to_angular((8.0 * e_c_phi * c.e_jk / n).sqrt()),
        omega_lc: energy_to_angular((8.0 * e_c_theta * e_l).sqrt()),
        n0_phi: (c.e_jk / (32.0 * n * e_c_phi)).powf(0.25),
        phi_0: (2.0 * n * e_c_phi / c.e_jk).powf(0.25),
        n0_theta: (e_l / (32.0 * e_c_theta)).powf(0.25),
        theta_0: (2.0 * e_c_theta / e_l).powf(0.25),
    })
}

/// Parameters of the modulated multi-level model, in rad/ns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub omega0: f64,
    pub amplitude: f64,
    pub omega_c: f64,
    /// Anharmonicity magnitude `E_C^φ/(ħN²)`: the second transition sits at
    /// `Ω₀ − δ_b`.
    pub delta_b: f64,
    pub lambda: f64,
    pub omega_f: f64,
    /// `dφ_ex/dt`, twice `omega_f`.
    pub flux_phase_rate: f64,
}

/// Normal-ordered coefficient of `a†a†aa` produced by the array's quartic
/// term `−N E_JK c₄ (φ/N)⁴` with `φ = φ₀(a + a†)`, in J. It equals
/// `−E_C^φ/(2N²)`.
pub fn kerr_coefficient(c: &CircuitParams, d: &DerivedCircuitEnergies) -> f64 {
    let n = c.n as f64;
    // (a + a†)⁴ contains 6 a†a†aa after normal ordering
    -(c.e_jk / (n * n * n)) * cos_series_coefficient(4) * 6.0 * d.phi_0.powi(4)
}

pub fn map_to_model(c: &CircuitParams) -> Result<ModelParams> {
    let d = derive_energies(c)?;
    let n = c.n as f64;
    let delta_b = energy_to_angular(d.e_c_phi / (n * n));
    let lambda = energy_to_angular(
        d.e_c_int * (4.0 * c.e_jk * d.e_l / (n * d.e_c_phi * d.e_c_theta)).powf(0.25),
    );
    Ok(ModelParams {
        omega0: d.omega_kpo - delta_b,
        amplitude: d.omega_kpo * n * c.e_j / c.e_jk,
        omega_c: d.omega_lc,
        delta_b,
        lambda,
        omega_f: c.flux_drive.omega_f(),
        flux_phase_rate: c.flux_drive.phase_rate,
    })
}

/// Targets for [`fit_circuit`], rad/ns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitTargets {
    pub omega0: f64,
    pub omega_c: f64,
    pub lambda: f64,
    pub amplitude: f64,
    pub omega_f: f64,
}

/// Adjusts `C_J`, `L_res`, `C_i` (Newton iteration in log space) and then
/// `E_J` and the flux drive so that `map_to_model` hits `targets`. The other
/// constants of `seed` are kept.
pub fn fit_circuit(seed: &CircuitParams, targets: &CircuitTargets) -> Result<CircuitParams> {
    const MAX_ITER: usize = 60;
    const REL_TOL: f64 = 1e-13;
    let residual = |p: &CircuitParams| -> Result<[f64; 3]> {
        let m = map_to_model(p)?;
        Ok([
            (m.omega0 / targets.omega0).ln(),
            (m.omega_c / targets.omega_c).ln(),
            (m.lambda / targets.lambda).ln(),
        ])
    };
    let with = |p: &CircuitParams, u: [f64; 3]| CircuitParams { c_j: u[0].exp(), l_res: u[1].exp(), c_i: u[2].exp(), ..*p };
    let mut p = *seed;
    if p.c_i <= 0.0 {
        return Err(Error::InvalidParameter { name: "C_i", reason: "seed must be coupled".into() });
    }
    let mut u = [p.c_j.ln(), p.l_res.ln(), p.c_i.ln()];
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let r = residual(&with(&p, u))?;
        if r.iter().all(|x| x.abs() < REL_TOL) {
            converged = true;
            break;
        }
        let mut jac = [[0.0; 3]; 3];
        for k in 0..3 {
            let h = 1e-6;
            let mut up = u;
            up[k] += h;
            let mut dn = u;
            dn[k] -= h;
            let rp = residual(&with(&p, up))?;
            let rm = residual(&with(&p, dn))?;
            for i in 0..3 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = solve3(jac, r).ok_or_else(|| Error::InvalidParameter {
            name: "seed",
            reason: "singular sensitivity matrix".into(),
        })?;
        // damped update keeps the kinetic form positive definite
        let scale = step.iter().fold(1.0f64, |s, x| s.min(1.0 / x.abs().max(1e-300)));
        for k in 0..3 {
            u[k] -= step[k] * scale.min(1.0);
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: MAX_ITER });
    }
    p = with(&p, u);
    let d = derive_energies(&p)?;
    p.e_j = targets.amplitude * p.e_jk / (p.n as f64 * d.omega_kpo);
    p.flux_drive.phase_rate = 2.0 * targets.omega_f;
    Ok(p)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for k in 0..3 {
        let mut m = a;
        for i in 0..3 {
            m[i][k] = b[i];
        }
        x[k] = det3(m) / d;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_coefficients() {
        assert_eq!(cos_series_coefficient(0), 1.0);
        assert_eq!(cos_series_coefficient(3), 0.0);
        assert!((cos_series_coefficient(2) + 0.5).abs() < 1e-16);
        assert!((cos_series_coefficient(4) - 1.0 / 24.0).abs() < 1e-16);
    }
}
