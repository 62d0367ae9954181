//! Lab-frame and effective-frame parameter sets, Bessel weights, the RWA
//! validity report and diagonal rotating frames used by the propagators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::hilbert::HilbertSpace;
use crate::linalg::{cis, C64};
use crate::{Error, Result};

/// Largest |x| accepted by [`bessel_j`].
pub const BESSEL_X_LIMIT: f64 = 10.0;
/// First positive zero of J₁.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512_3;
/// Ratio every RWA scale must clear for [`rwa_validity`] to pass.
pub const RWA_THRESHOLD: f64 = 20.0;

/// Bessel functions of the first kind, `J_0(x) ..= J_max_order(x)`.
///
/// Downward Miller recurrence started well above both `max_order` and `|x|`,
/// normalised with `J_0² + 2 Σ J_k² = 1`; the overall sign is fixed by
/// `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_orders(max_order: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x.abs() > BESSEL_X_LIMIT {
        return Err(Error::BesselRange { x, limit: BESSEL_X_LIMIT });
    }
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let ax = x.abs();
    let mut start = 2 * (max_order.max(ax.ceil() as usize) + 30);
    if start % 2 == 1 {
        start += 1;
    }
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1.0;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / ax * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e100 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-100;
            }
        }
    }
    let sq: f64 = vals[0] * vals[0] + 2.0 * vals[1..].iter().map(|v| v * v).sum::<f64>();
    let even: f64 = vals[0] + 2.0 * vals[2..].iter().step_by(2).sum::<f64>();
    let norm = sq.sqrt() * even.signum();
    for (n, o) in out.iter_mut().enumerate() {
        let v = vals[n] / norm;
        // J_n(-x) = (-1)^n J_n(x)
        *o = if x < 0.0 && n % 2 == 1 { -v } else { v };
    }
    Ok(out)
}

/// `J_n(x)` for any integer order, with `J_{-n} = (-1)^n J_n`.
pub fn bessel_j(n: i32, x: f64) -> Result<f64> {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_orders(m, x)?[m];
    Ok(if n < 0 && m % 2 == 1 { -v } else { v })
}

/// Sinusoidal modulation of the atomic splitting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulation {
    pub amplitude: f64,
    pub omega_f: f64,
}

impl Modulation {
    pub fn x(&self) -> f64 {
        self.amplitude / self.omega_f
    }
}

/// Physical parameters of the modulated Rabi model. `modulation: None` is the
/// bare Rabi model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabFrameParams {
    pub omega0: f64,
    pub omega_c: f64,
    pub lambda: f64,
    pub modulation: Option<Modulation>,
}

impl LabFrameParams {
    pub fn new(omega0: f64, omega_c: f64, lambda: f64, amplitude: f64, omega_f: f64) -> Result<Self> {
        let p = Self {
            omega0,
            omega_c,
            lambda,
            modulation: Some(Modulation { amplitude, omega_f }),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn unmodulated(omega0: f64, omega_c: f64, lambda: f64) -> Result<Self> {
        let p = Self { omega0, omega_c, lambda, modulation: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega0", self.omega0)?;
        positive("omega_c", self.omega_c)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if let Some(m) = self.modulation {
            positive("omega_f", m.omega_f)?;
            if !(m.amplitude >= 0.0 && m.amplitude.is_finite()) {
                return Err(invalid("A", format!("must be finite and >= 0, got {}", m.amplitude)));
            }
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        self.modulation.map_or(0.0, |m| m.amplitude)
    }

    pub fn omega_f(&self) -> f64 {
        self.modulation.map_or(0.0, |m| m.omega_f)
    }

    /// `A / ω_f`, zero without modulation.
    pub fn x(&self) -> f64 {
        self.modulation.map_or(0.0, |m| m.x())
    }

    pub fn to_effective(&self) -> Result<EffectiveParams> {
        let m = self.modulation.ok_or_else(|| {
            invalid("omega_f", "the effective frame needs a modulated model".into())
        })?;
        let delta = self.omega0 - self.omega_c;
        let big_delta = self.omega0 + self.omega_c - m.omega_f;
        let x = m.x();
        Ok(EffectiveParams {
            delta,
            big_delta,
            omega_c: (big_delta - delta) / 2.0,
            omega0: (big_delta + delta) / 2.0,
            lambda: self.lambda,
            x,
            lambda1: self.lambda * bessel_j(-1, x)?,
            lambda2: self.lambda * bessel_j(0, x)?,
        })
    }
}

/// Rotating-frame quantities: detunings, effective frequencies and the
/// Bessel-weighted couplings `λ₁ = λ J₋₁(x)`, `λ₂ = λ J₀(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParams {
    pub delta: f64,
    pub big_delta: f64,
    pub omega_c: f64,
    pub omega0: f64,
    pub lambda: f64,
    pub x: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl EffectiveParams {
    /// Builds the effective model directly from `(ω₀, ω_c, λ, x)`.
    pub fn new(omega0: f64, omega_c: f64, lambda: f64, x: f64) -> Result<Self> {
        positive("omega0_eff", omega0)?;
        positive("omega_c_eff", omega_c)?;
        Ok(Self {
            delta: omega0 - omega_c,
            big_delta: omega0 + omega_c,
            omega_c,
            omega0,
            lambda,
            x,
            lambda1: lambda * bessel_j(-1, x)?,
            lambda2: lambda * bessel_j(0, x)?,
        })
    }

    pub fn with_omega_c(&self, omega_c: f64) -> Result<Self> {
        Self::new(self.omega0, omega_c, self.lambda, self.x)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.omega0, self.omega_c, lambda, self.x)
    }

    pub fn with_x(&self, x: f64) -> Result<Self> {
        Self::new(self.omega0, self.omega_c, self.lambda, x)
    }
}

/// Lowers an effective-frame operating point to lab parameters:
/// `ω_f = 2Ω₀ − 2ω₀`, `Ω_c = ω_c + ω_f/2`, `A = x ω_f`.
pub fn from_effective(
    omega0_eff: f64,
    omega_c_eff: f64,
    x: f64,
    omega0_lab: f64,
    lambda: f64,
) -> Result<LabFrameParams> {
    if !(omega0_eff > omega_c_eff && omega_c_eff > 0.0) {
        return Err(invalid(
            "omega_c_eff",
            format!("need omega0_eff > omega_c_eff > 0, got {omega0_eff} and {omega_c_eff}"),
        ));
    }
    let omega_f = 2.0 * omega0_lab - 2.0 * omega0_eff;
    if omega_f <= 0.0 {
        return Err(invalid("omega_f", format!("derived omega_f = {omega_f} is not positive")));
    }
    LabFrameParams::new(omega0_lab, omega_c_eff + omega_f / 2.0, lambda, x * omega_f, omega_f)
}

/// Scale ratios behind the rotating-wave reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityReport {
    pub omega_f_over_delta: f64,
    pub omega_f_over_big_delta: f64,
    pub omega_f_over_coupling: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn rwa_validity(p: &LabFrameParams) -> Result<ValidityReport> {
    let eff = p.to_effective()?;
    let omega_f = p.omega_f();
    let orders = bessel_j_orders(40, eff.x)?;
    let jmax = orders.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratio = |scale: f64| if scale == 0.0 { f64::INFINITY } else { omega_f / scale.abs() };
    let r = ValidityReport {
        omega_f_over_delta: ratio(eff.delta),
        omega_f_over_big_delta: ratio(eff.big_delta),
        omega_f_over_coupling: ratio(p.lambda * jmax),
        threshold: RWA_THRESHOLD,
        pass: false,
    };
    let pass = [r.omega_f_over_delta, r.omega_f_over_big_delta, r.omega_f_over_coupling]
        .iter()
        .all(|&v| v >= RWA_THRESHOLD);
    Ok(ValidityReport { pass, ..r })
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn invalid(name: &'static str, reason: alloc::string::String) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Diagonal frame `U(t) = diag(exp(-i φ_k(t)))` with
/// `φ_k(t) = rate_k t + beta_k sin(nu t)`; lab states are `ψ = U ψ_frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotatingFrame {
    pub rates: Vec<f64>,
    pub betas: Vec<f64>,
    pub nu: f64,
    /// Period of the framed generator when it is periodic.
    pub period: Option<f64>,
}

impl RotatingFrame {
    pub fn identity(dim: usize) -> Self {
        Self { rates: vec![0.0; dim], betas: vec![0.0; dim], nu: 0.0, period: None }
    }

    /// Frame with constant rates only.
    pub fn static_rates(rates: Vec<f64>, period: Option<f64>) -> Self {
        let n = rates.len();
        Self { rates, betas: vec![0.0; n], nu: 0.0, period }
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn phases(&self, t: f64) -> Vec<f64> {
        let s = (self.nu * t).sin();
        self.rates.iter().zip(&self.betas).map(|(r, b)| r * t + b * s).collect()
    }

    /// `exp(i φ_k(t))`
    pub fn phase_factors(&self, t: f64) -> Vec<C64> {
        self.phases(t).into_iter().map(cis).collect()
    }

    /// `dφ_k/dt`
    pub fn phase_rates(&self, t: f64) -> Vec<f64> {
        let c = self.nu * (self.nu * t).cos();
        self.rates.iter().zip(&self.betas).map(|(r, b)| r + b * c).collect()
    }

    /// Lab-frame amplitudes from frame amplitudes.
    pub fn to_lab(&self, t: f64, psi_frame: &[C64]) -> Vec<C64> {
        self.phase_factors(t).iter().zip(psi_frame).map(|(p, z)| p.conj() * z).collect()
    }

    pub fn from_lab(&self, t: f64, psi_lab: &[C64]) -> Vec<C64> {
        self.phase_factors(t).iter().zip(psi_lab).map(|(p, z)| p * z).collect()
    }

    /// Largest instantaneous phase rate difference between states `i`, `j`.
    pub fn pair_rate(&self, i: usize, j: usize) -> f64 {
        (self.rates[i] - self.rates[j]).abs() + (self.betas[i] - self.betas[j]).abs() * self.nu.abs()
    }

    /// The frame of the `U₁` transformation: `Ω_c n ± Ω₀/2` rates with
    /// `± x/2` sinusoidal phases. Conjugating the lab Hamiltonian by it gives
    /// the sideband-expanded rotating-frame Hamiltonian.
    pub fn u1(space: &HilbertSpace, p: &LabFrameParams) -> Result<Self> {
        two_level_only(space)?;
        let mut rates = Vec::with_capacity(space.dim());
        let mut betas = Vec::with_capacity(space.dim());
        for label in space.labels() {
            let s = if label.atom.index() == 1 { 0.5 } else { -0.5 };
            rates.push(p.omega_c * label.photons as f64 + s * p.omega0);
            betas.push(s * p.x());
        }
        Ok(Self { rates, betas, nu: p.omega_f(), period: None })
    }

    /// Frame removing `ω_c a†a + ω₀ σ_z/2` (two-level) from a rotating-frame
    /// Hamiltonian.
    pub fn free_effective(space: &HilbertSpace, eff: &EffectiveParams, period: Option<f64>) -> Result<Self> {
        two_level_only(space)?;
        let rates = space
            .labels()
            .iter()
            .map(|l| {
                let s = if l.atom.index() == 1 { 0.5 } else { -0.5 };
                -(eff.omega_c * l.photons as f64 + s * eff.omega0)
            })
            .collect();
        Ok(Self::static_rates(rates, period))
    }

    /// Co-moving frame for lab Hamiltonians whose atom level `q` (−½, ½ for a
    /// two-level atom; 0, 1, 2 for three levels) is modulated by
    /// `q·A cos(ω_f t)`. Rates are `ρ(n + q)` with `ρ` a rational multiple of
    /// `ω_f/2` chosen close to `target_rate`, so the framed generator is
    /// periodic; without modulation `ρ = target_rate`.
    pub fn co_moving(space: &HilbertSpace, modulation: Option<Modulation>, target_rate: f64) -> Result<Self> {
        positive("target_rate", target_rate)?;
        let (rho, period, x, nu) = match modulation {
            Some(m) if m.omega_f > 0.0 => {
                let (num, den) = commensurate_ratio(target_rate / (m.omega_f / 2.0), 12);
                if num == 0 {
                    return Err(invalid(
                        "omega_f",
                        format!("modulation {} too fast for target rate {target_rate}", m.omega_f),
                    ));
                }
                let rho = m.omega_f / 2.0 * num as f64 / den as f64;
                (rho, 2.0 * core::f64::consts::PI * den as f64 / m.omega_f, m.x(), m.omega_f)
            }
            _ => (target_rate, core::f64::consts::PI / target_rate, 0.0, 0.0),
        };
        let two_level = space.atom_levels() == 2;
        let mut rates = Vec::with_capacity(space.dim());
        let mut betas = Vec::with_capacity(space.dim());
        for l in space.labels() {
            let q = if two_level { l.atom.index() as f64 - 0.5 } else { l.atom.index() as f64 };
            rates.push(rho * (l.photons as f64 + q));
            betas.push(q * x);
        }
        Ok(Self { rates, betas, nu, period: Some(period) })
    }
}

fn two_level_only(space: &HilbertSpace) -> Result<()> {
    if space.atom_levels() != 2 {
        return Err(Error::InvalidSpace("frame defined for a two-level atom only".into()));
    }
    Ok(())
}

/// Best rational approximation `num/den` of `r` with `den <= max_den`.
fn commensurate_ratio(r: f64, max_den: u32) -> (u32, u32) {
    let mut best = (0u32, 1u32);
    let mut err = f64::INFINITY;
    for den in 1..=max_den {
        let num = (r * den as f64).round().max(0.0) as u32;
        let e = (r - num as f64 / den as f64).abs();
        if e < err - 1e-12 {
            best = (num, den);
            err = e;
        }
    }
    best
}
