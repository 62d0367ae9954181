//! Closed-form second-order results for the three-photon resonance.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::frames::{bessel_j, EffectiveParams};
use crate::hilbert::HilbertSpace;
use crate::spectral::{self, SplittingRow};
use crate::{Error, Result};

/// Effective Rabi frequency `√6 λ₂² |λ₁| / δ²`.
///
/// The coupling element of the effective model is `−√6 λ₂² λ₁ / δ²`, which is
/// positive because `λ₁ = −λ J₁(x) < 0` below the first zero of `J₁`. Here
/// only the magnitude is returned.
pub fn rabi_frequency_eff(p: &EffectiveParams) -> Result<f64> {
    if p.delta == 0.0 || !p.delta.is_finite() {
        return Err(Error::InvalidParameter { name: "delta", reason: alloc::format!("{}", p.delta) });
    }
    Ok(6f64.sqrt() * p.lambda2 * p.lambda2 * p.lambda1.abs() / (p.delta * p.delta))
}

/// `ω_c′/ω₀ = 1/3 + 2 (J₀² + J₋₁²/2) (λ/ω₀)²`.
pub fn resonance_position(lambda_ratio: f64, x: f64) -> f64 {
    // Bessel evaluation fails only for |x| > 10, where the model has no meaning;
    // NaN propagates to the caller in that case.
    let j0 = bessel_j(0, x).unwrap_or(f64::NAN);
    let jm1 = bessel_j(-1, x).unwrap_or(f64::NAN);
    1.0 / 3.0 + 2.0 * (j0 * j0 + 0.5 * jm1 * jm1) * lambda_ratio * lambda_ratio
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticReport {
    pub lambda: f64,
    pub x: f64,
    pub omega0: f64,
    pub delta: f64,
    pub omega_eff: f64,
    pub splitting: f64,
    pub omega_c_prime_ratio: f64,
}

/// Evaluates both closed forms with `δ = ω₀ − ω_c′`.
pub fn analytic_report(omega0: f64, lambda: f64, x: f64) -> Result<AnalyticReport> {
    let ratio = resonance_position(lambda / omega0, x);
    let p = EffectiveParams::new(omega0, ratio * omega0, lambda, x)?;
    let omega_eff = rabi_frequency_eff(&p)?;
    Ok(AnalyticReport {
        lambda,
        x,
        omega0,
        delta: p.delta,
        omega_eff,
        splitting: 2.0 * omega_eff,
        omega_c_prime_ratio: ratio,
    })
}

/// Numeric and analytic splittings side by side.
pub fn compare_splitting(lambdas: &[f64], x: f64, space: &HilbertSpace) -> Result<Vec<SplittingRow>> {
    spectral::splitting_vs_lambda(lambdas, x, 1.0, space)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_limits() {
        assert_eq!(resonance_position(0.0, 0.5), 1.0 / 3.0);
        let p = EffectiveParams::new(1.0, 1.0 / 3.0, 0.01, crate::frames::J1_FIRST_ZERO).unwrap();
        assert!(rabi_frequency_eff(&p).unwrap() < 1e-20);
        let a = EffectiveParams::new(1.0, 1.0 / 3.0, 0.01, 0.5).unwrap();
        let b = a.with_lambda(0.02).unwrap();
        let r = rabi_frequency_eff(&b).unwrap() / rabi_frequency_eff(&a).unwrap();
        assert!((r - 8.0).abs() < 1e-12);
        assert!(rabi_frequency_eff(&a.with_omega_c(1.0).unwrap()).is_err());
    }
}
