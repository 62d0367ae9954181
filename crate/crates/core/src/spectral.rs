//! Spectrum scans over the cavity frequency and location of the
//! `|e,0⟩ ↔ |g,3⟩` avoided crossing.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::analytics;
use crate::frames::EffectiveParams;
use crate::hamiltonians::anisotropic_rabi;
use crate::hilbert::{AtomLevel, BasisLabel, HilbertSpace};
use crate::linalg::{c64, eig_hermitian, ComplexMatrix, EigenDecomposition, StateVector};
use crate::{Error, Result};

/// Relative tolerance of the golden-section search on the swept parameter.
pub const CROSSING_REL_TOL: f64 = 1e-10;
/// Half width of the default bracket around the second-order resonance.
pub const DEFAULT_BRACKET_HALF_WIDTH: f64 = 0.01;

pub const E0: BasisLabel = BasisLabel::new(AtomLevel::E, 0);
pub const G3: BasisLabel = BasisLabel::new(AtomLevel::G, 3);

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumScan {
    pub sweep_values: Vec<f64>,
    pub level_indices: Vec<usize>,
    /// `energies[k][m]` is level `level_indices[m]` at `sweep_values[k]`.
    pub energies: Vec<Vec<f64>>,
    /// `(sweep index, level)` pairs where a tracked level is degenerate with a
    /// neighbour, so the eigenvalue ordering does not identify it.
    pub degeneracies: Vec<(usize, usize)>,
}

/// Eigenvalues of the anisotropic Rabi Hamiltonian along a sweep of `ω_c`.
pub fn scan_spectrum(
    template: &EffectiveParams,
    space: &HilbertSpace,
    sweep: &[f64],
    levels: &[usize],
) -> Result<SpectrumScan> {
    scan_with(|w| anisotropic_rabi(space, &template.with_omega_c(w)?), sweep, levels)
}

/// Spectrum scan over any Hamiltonian family `build(value)`.
pub fn scan_with(
    build: impl Fn(f64) -> Result<ComplexMatrix>,
    sweep: &[f64],
    levels: &[usize],
) -> Result<SpectrumScan> {
    let mut energies = Vec::with_capacity(sweep.len());
    let mut degeneracies = Vec::new();
    for (k, &w) in sweep.iter().enumerate() {
        let h = build(w)?;
        let eig = eig_hermitian(&h)?;
        let tol = 1e-12 * h.max_abs().max(1.0);
        let mut row = Vec::with_capacity(levels.len());
        for &l in levels {
            if l >= eig.dim() {
                return Err(Error::DimensionMismatch { expected: l + 1, found: eig.dim() });
            }
            let e = eig.values[l];
            let below = l > 0 && (e - eig.values[l - 1]).abs() < tol;
            let above = l + 1 < eig.dim() && (eig.values[l + 1] - e).abs() < tol;
            if below || above {
                degeneracies.push((k, l));
            }
            row.push(e);
        }
        energies.push(row);
    }
    Ok(SpectrumScan { sweep_values: sweep.to_vec(), level_indices: levels.to_vec(), energies, degeneracies })
}

/// The avoided crossing between the eigenstates carrying `|e,0⟩` and `|g,3⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossingReport {
    pub omega_c_star: f64,
    /// `E_upper − E_lower` at the minimum.
    pub splitting: f64,
    pub lower_index: usize,
    pub upper_index: usize,
    pub lower_energy: f64,
    pub upper_energy: f64,
    /// Overlap of `|B⟩ = (|e,0⟩ + |g,3⟩)/√2` with the eigenstate assigned to it.
    pub f_b: f64,
    /// Overlap of `|C⟩ = (|e,0⟩ − |g,3⟩)/√2` with the eigenstate assigned to it.
    pub f_c: f64,
    /// Whether `|B⟩` is assigned to the lower of the two eigenstates.
    pub lower_is_b: bool,
    /// `|⟨ψ_lower|ψ_upper⟩|`
    pub orthogonality_defect: f64,
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`, stopping at
/// relative tolerance `rel_tol`. Fails if the minimum sits on the bracket edge.
pub fn golden_section_min(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0usize;
    // the bracket width floors the scale so a minimum at zero still terminates
    let width = (hi - lo).abs();
    while (b - a).abs() > rel_tol * ((a.abs() + b.abs()) / 2.0).max(width) {
        iterations += 1;
        if iterations > 500 {
            return Err(Error::NoConvergence { iterations });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
    let edge = 1e-6 * (hi - lo).abs();
    if (x - lo).abs() < edge || (hi - x).abs() < edge {
        return Err(Error::NoInteriorMinimum { lo, hi });
    }
    Ok((x, fx))
}

/// Indices `(lower, upper)` of the two eigenvectors with the largest weight in
/// `span{u, v}`.
pub fn pair_by_overlap(eig: &EigenDecomposition, u: &StateVector, v: &StateVector) -> (usize, usize) {
    let weight = |k: usize| {
        let psi = StateVector(eig.vector(k));
        u.inner(&psi).norm_sqr() + v.inner(&psi).norm_sqr()
    };
    let mut idx: Vec<usize> = (0..eig.dim()).collect();
    idx.sort_by(|&a, &b| weight(b).partial_cmp(&weight(a)).unwrap_or(core::cmp::Ordering::Equal));
    let (a, b) = (idx[0], idx[1]);
    (a.min(b), a.max(b))
}

/// Minimises the splitting of the pair carrying `u`, `v` over `build(value)`
/// for `value` in `bracket`, and reports overlaps with `(u ± v)/√2`.
pub fn locate_crossing_with(
    build: impl Fn(f64) -> Result<ComplexMatrix>,
    u: &StateVector,
    v: &StateVector,
    bracket: (f64, f64),
) -> Result<CrossingReport> {
    let gap = |w: f64| -> Result<f64> {
        let eig = eig_hermitian(&build(w)?)?;
        let (i, j) = pair_by_overlap(&eig, u, v);
        Ok(eig.values[j] - eig.values[i])
    };
    let (w_star, _) = golden_section_min(gap, bracket.0, bracket.1, CROSSING_REL_TOL)?;
    let eig = eig_hermitian(&build(w_star)?)?;
    let (i, j) = pair_by_overlap(&eig, u, v);
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let b = StateVector::superpose(&[(c64(s, 0.0), u), (c64(s, 0.0), v)]);
    let c = StateVector::superpose(&[(c64(s, 0.0), u), (c64(-s, 0.0), v)]);
    let lo = StateVector(eig.vector(i));
    let hi = StateVector(eig.vector(j));
    let b_lo = b.inner(&lo).norm();
    let c_hi = c.inner(&hi).norm();
    let b_hi = b.inner(&hi).norm();
    let c_lo = c.inner(&lo).norm();
    let lower_is_b = b_lo + c_hi >= b_hi + c_lo;
    let (f_b, f_c) = if lower_is_b { (b_lo, c_hi) } else { (b_hi, c_lo) };
    Ok(CrossingReport {
        omega_c_star: w_star,
        splitting: eig.values[j] - eig.values[i],
        lower_index: i,
        upper_index: j,
        lower_energy: eig.values[i],
        upper_energy: eig.values[j],
        f_b,
        f_c,
        lower_is_b,
        orthogonality_defect: lo.inner(&hi).norm(),
    })
}

/// Default bracket: the second-order resonance position ± 0.01 ω₀.
pub fn default_bracket(params: &EffectiveParams) -> (f64, f64) {
    let centre = analytics::resonance_position(params.lambda / params.omega0, params.x) * params.omega0;
    let h = DEFAULT_BRACKET_HALF_WIDTH * params.omega0;
    (centre - h, centre + h)
}

/// Three-photon crossing of the anisotropic Rabi model; `params.omega_c` is
/// ignored.
pub fn locate_crossing(
    params: &EffectiveParams,
    space: &HilbertSpace,
    bracket: Option<(f64, f64)>,
) -> Result<CrossingReport> {
    let u = space.basis_state(E0)?;
    let v = space.basis_state(G3)?;
    let bracket = bracket.unwrap_or_else(|| default_bracket(params));
    locate_crossing_with(|w| anisotropic_rabi(space, &params.with_omega_c(w)?), &u, &v, bracket)
}

/// One row of the numeric-versus-analytic splitting comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplittingRow {
    pub lambda: f64,
    pub omega_c_star: f64,
    pub numeric: f64,
    pub analytic: f64,
    /// `100·|analytic − numeric|/numeric`
    pub percent_difference: f64,
}

/// Numeric splitting at each located crossing against `2Ω_eff`, with `δ`
/// taken at the numeric resonance.
pub fn splitting_vs_lambda(
    lambdas: &[f64],
    x: f64,
    omega0: f64,
    space: &HilbertSpace,
) -> Result<Vec<SplittingRow>> {
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda > 0.0 && lambda <= 0.1 * omega0 + 1e-15) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: alloc::format!("{lambda} outside (0, 0.1 omega0]"),
            });
        }
        let template = EffectiveParams::new(omega0, omega0 / 3.0, lambda, x)?;
        let report = locate_crossing(&template, space, None)?;
        let at = template.with_omega_c(report.omega_c_star)?;
        let analytic = 2.0 * analytics::rabi_frequency_eff(&at)?;
        rows.push(SplittingRow {
            lambda,
            omega_c_star: report.omega_c_star,
            numeric: report.splitting,
            analytic,
            percent_difference: 100.0 * (analytic - report.splitting).abs() / report.splitting,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_parabola() {
        let (x, fx) = golden_section_min(|x| Ok((x - 0.3).powi(2) + 1.0), 0.0, 1.0, 1e-12).unwrap();
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-12);
        assert!(matches!(
            golden_section_min(|x| Ok(x), 0.0, 1.0, 1e-10),
            Err(Error::NoInteriorMinimum { .. })
        ));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 * x.powi(3)).collect();
        assert!((log_log_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }
}
