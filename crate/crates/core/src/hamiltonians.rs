//! Hamiltonian builders. Every form is a [`TimeDependentOperator`]: a static
//! Hermitian part plus oscillating terms `M c(t) + M† c*(t)` with
//! `c(t) = amp · exp(i(ω t + β sin ν t))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::frames::{bessel_j_orders, EffectiveParams, LabFrameParams, Modulation, RotatingFrame};
use crate::hilbert::{AtomLevel, AtomOperator, HilbertSpace};
use crate::linalg::{c64, cis, ComplexMatrix, SparseMatrix, C64};
use crate::{Error, Result};

/// Default sideband truncation `|n| <= K` of the Jacobi–Anger sums.
pub const DEFAULT_BESSEL_ORDER: usize = 8;

/// `amp · exp(i(frequency·t + beta·sin(nu·t)))`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficient {
    pub amplitude: C64,
    pub frequency: f64,
    pub beta: f64,
    pub nu: f64,
}

impl Coefficient {
    pub fn harmonic(amplitude: f64, frequency: f64) -> Self {
        Self { amplitude: c64(amplitude, 0.0), frequency, beta: 0.0, nu: 0.0 }
    }

    pub fn value(&self, t: f64) -> C64 {
        self.amplitude * cis(self.frequency * t + self.beta * (self.nu * t).sin())
    }

    /// Upper bound on the instantaneous angular frequency.
    pub fn max_frequency(&self) -> f64 {
        self.frequency.abs() + (self.beta * self.nu).abs()
    }
}

#[derive(Clone, Debug)]
struct Term {
    matrix: ComplexMatrix,
    coeff: Coefficient,
    diag: Vec<C64>,
    off: SparseMatrix,
    off_adj: SparseMatrix,
}

impl Term {
    fn new(matrix: ComplexMatrix, coeff: Coefficient) -> Self {
        let diag = matrix.diagonal();
        let mut off = matrix.clone();
        for i in 0..off.rows() {
            off[(i, i)] = c64(0.0, 0.0);
        }
        let off_adj = SparseMatrix::from_dense(&off.adjoint(), 0.0);
        let off = SparseMatrix::from_dense(&off, 0.0);
        Self { matrix, coeff, diag, off, off_adj }
    }
}

/// `H(t) = H_static + Σ_k (M_k c_k(t) + h.c.)`
#[derive(Clone, Debug)]
pub struct TimeDependentOperator {
    dim: usize,
    static_part: ComplexMatrix,
    static_diag: Vec<f64>,
    static_off: SparseMatrix,
    terms: Vec<Term>,
}

impl TimeDependentOperator {
    pub fn zero(dim: usize) -> Self {
        Self::from_static(ComplexMatrix::zeros(dim, dim)).expect("zero matrix is Hermitian")
    }

    pub fn from_static(h: ComplexMatrix) -> Result<Self> {
        h.check_hermitian()?;
        let dim = h.rows();
        let mut op = Self {
            dim,
            static_part: ComplexMatrix::zeros(dim, dim),
            static_diag: vec![0.0; dim],
            static_off: SparseMatrix::from_dense(&ComplexMatrix::zeros(dim, dim), 0.0),
            terms: Vec::new(),
        };
        op.add_static(&h)?;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_static(&mut self, h: &ComplexMatrix) -> Result<()> {
        self.check_dim(h)?;
        h.check_hermitian()?;
        self.static_part += h;
        self.static_diag = self.static_part.diagonal().iter().map(|z| z.re).collect();
        let mut off = self.static_part.clone();
        for i in 0..self.dim {
            off[(i, i)] = c64(0.0, 0.0);
        }
        self.static_off = SparseMatrix::from_dense(&off, 0.0);
        Ok(())
    }

    /// Adds `M c(t) + M† c*(t)`.
    pub fn add_oscillating(&mut self, m: ComplexMatrix, coeff: Coefficient) -> Result<()> {
        self.check_dim(&m)?;
        if m.max_abs() > 0.0 && coeff.amplitude != c64(0.0, 0.0) {
            self.terms.push(Term::new(m, coeff));
        }
        Ok(())
    }

    fn check_dim(&self, m: &ComplexMatrix) -> Result<()> {
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: m.rows() });
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn static_part(&self) -> &ComplexMatrix {
        &self.static_part
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Largest oscillation frequency among the terms.
    pub fn max_term_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.max_frequency()).fold(0.0, f64::max)
    }

    /// Bound on `‖H(t)‖` (row-sum norm), used for step-size selection.
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.dim];
        for i in 0..self.dim {
            rows[i] = self.static_part.row(i).iter().map(|z| z.norm()).sum();
        }
        for t in &self.terms {
            let a = t.coeff.amplitude.norm();
            for i in 0..self.dim {
                let r: f64 = t.matrix.row(i).iter().map(|z| z.norm()).sum();
                let c: f64 = (0..self.dim).map(|j| t.matrix[(j, i)].norm()).sum();
                rows[i] += a * (r + c);
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn evaluate(&self, t: f64) -> ComplexMatrix {
        let mut h = self.static_part.clone();
        for term in &self.terms {
            let c = term.coeff.value(t);
            let cc = c.conj();
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h[(i, j)] += term.matrix[(i, j)] * c + term.matrix[(j, i)].conj() * cc;
                }
            }
        }
        h
    }

    /// Real diagonal of `H(t)`.
    pub fn diagonal(&self, t: f64) -> Vec<f64> {
        let mut d = self.static_diag.clone();
        for term in &self.terms {
            let c = term.coeff.value(t);
            for (di, m) in d.iter_mut().zip(&term.diag) {
                *di += 2.0 * (m * c).re;
            }
        }
        d
    }

    /// Calls `f(coefficient, block)` for every off-diagonal block so that the
    /// off-diagonal part of `H(t)` is `Σ coefficient·block`.
    pub fn for_each_offdiag(&self, t: f64, mut f: impl FnMut(C64, &SparseMatrix)) {
        if self.static_off.nnz() > 0 {
            f(c64(1.0, 0.0), &self.static_off);
        }
        for term in &self.terms {
            let c = term.coeff.value(t);
            if term.off.nnz() > 0 {
                f(c, &term.off);
                f(c.conj(), &term.off_adj);
            }
        }
    }

    /// `y = H(t) x`
    pub fn apply(&self, t: f64, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(self.diagonal(t)) {
            *yi = xi * d;
        }
        self.for_each_offdiag(t, |c, m| m.mul_vec_add(c, x, y));
    }

    /// Applies the framed generator `U†HU − diag(φ')`, `U = diag(e^{−iφ})`.
    /// `scratch` must have length `dim`.
    pub fn apply_framed(&self, t: f64, frame: &RotatingFrame, x: &[C64], y: &mut [C64], scratch: &mut [C64]) {
        let p = frame.phase_factors(t);
        let rates = frame.phase_rates(t);
        for ((s, pi), xi) in scratch.iter_mut().zip(&p).zip(x) {
            *s = pi.conj() * xi;
        }
        for yi in y.iter_mut() {
            *yi = c64(0.0, 0.0);
        }
        self.for_each_offdiag(t, |c, m| m.mul_vec_add(c, scratch, y));
        let d = self.diagonal(t);
        for i in 0..self.dim {
            y[i] = p[i] * y[i] + x[i] * (d[i] - rates[i]);
        }
    }

    /// Framed generator as a dense matrix.
    pub fn evaluate_framed(&self, t: f64, frame: &RotatingFrame) -> ComplexMatrix {
        let h = self.evaluate(t);
        let p = frame.phase_factors(t);
        let rates = frame.phase_rates(t);
        ComplexMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                c64(h[(i, i)].re - rates[i], 0.0)
            } else {
                p[i] * h[(i, j)] * p[j].conj()
            }
        })
    }

    /// Bound on the angular frequencies present in the framed generator:
    /// residual diagonal energies and the phase rates of coupled pairs.
    pub fn framed_max_frequency(&self, frame: &RotatingFrame) -> f64 {
        let mut w: f64 = 0.0;
        let mut diag_bound = vec![0.0; self.dim];
        for i in 0..self.dim {
            diag_bound[i] = (self.static_diag[i] - frame.rates[i]).abs() + (frame.betas[i] * frame.nu).abs();
        }
        for term in &self.terms {
            for (b, m) in diag_bound.iter_mut().zip(&term.diag) {
                *b += 2.0 * m.norm() * term.coeff.amplitude.norm();
            }
        }
        for b in diag_bound {
            w = w.max(b);
        }
        for (i, j, _) in self.static_off.entries() {
            w = w.max(frame.pair_rate(i, j));
        }
        for term in &self.terms {
            let f = term.coeff.max_frequency();
            for (i, j, _) in term.off.entries() {
                w = w.max(frame.pair_rate(i, j) + f);
            }
        }
        // strong couplings set their own time scale through the row-sum norm
        let mut off_rows = vec![0.0; self.dim];
        for (i, _, v) in self.static_off.entries() {
            off_rows[i] += v.norm();
        }
        for term in &self.terms {
            let a = term.coeff.amplitude.norm();
            for (i, j, v) in term.off.entries() {
                off_rows[i] += a * v.norm();
                off_rows[j] += a * v.norm();
            }
        }
        off_rows.into_iter().fold(w, f64::max)
    }
}

/// Three-level atom coupled to the mode, with `δ_b = Ω_b − 2Ω₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeLevelParams {
    pub omega0: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub lambda: f64,
    pub modulation: Option<Modulation>,
}

impl ThreeLevelParams {
    pub fn new(omega0: f64, delta_b: f64, omega_c: f64, lambda: f64, modulation: Option<Modulation>) -> Result<Self> {
        let p = Self { omega0, omega_b: 2.0 * omega0 + delta_b, omega_c, lambda, modulation };
        LabFrameParams { omega0, omega_c, lambda, modulation }.validate()?;
        Ok(p)
    }

    pub fn delta_b(&self) -> f64 {
        self.omega_b - 2.0 * self.omega0
    }

    /// `Ω₀ − Ω_c`; called δ′ for the unmodulated model.
    pub fn delta(&self) -> f64 {
        self.omega0 - self.omega_c
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta()
    }

    /// `Ω₀ + Ω_c − ω_f`
    pub fn big_delta(&self) -> f64 {
        self.omega0 + self.omega_c - self.modulation.map_or(0.0, |m| m.omega_f)
    }

    pub fn x(&self) -> f64 {
        self.modulation.map_or(0.0, |m| m.x())
    }

    pub fn two_level(&self) -> LabFrameParams {
        LabFrameParams { omega0: self.omega0, omega_c: self.omega_c, lambda: self.lambda, modulation: self.modulation }
    }
}

/// The Hamiltonian forms of the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HamiltonianSpec {
    /// `Ω_c a†a + Ω₀σ_z/2 + λ(a + a†)σ_x`
    StaticRabi(LabFrameParams),
    /// Static Rabi model plus `(A/2) cos(ω_f t) σ_z`.
    LabFull(LabFrameParams),
    /// `U₁`-frame sideband expansion keeping `|n| <= order` in both sums.
    RotatingFrame { params: LabFrameParams, order: usize },
    /// `λ₁ a†σ₊ e^{iΔt} + λ₂ aσ₊ e^{iδt} + h.c.`
    RwaTwoTone(EffectiveParams),
    /// `ω_c a†a + ω₀σ_z/2 + (λ₁ a†σ₊ + λ₂ aσ₊ + h.c.)`
    AnisotropicRabi(EffectiveParams),
    /// Free part plus second-order Stark shifts and the three-photon term.
    Effective3rdOrder(EffectiveParams),
    /// Modulated three-level atom in the lab frame.
    ThreeLevelLab(ThreeLevelParams),
    /// Sideband expansion of the three-level model in its rotating frame.
    ThreeLevelRotating { params: ThreeLevelParams, order: usize },
    /// Two resonant sidebands of the three-level model.
    ThreeLevelRwa(ThreeLevelParams),
    /// Unmodulated three-level model in the frame of its free Hamiltonian.
    ThreeLevelUnmodulated(ThreeLevelParams),
}

pub fn build(spec: &HamiltonianSpec, space: &HilbertSpace) -> Result<TimeDependentOperator> {
    match *spec {
        HamiltonianSpec::StaticRabi(p) => TimeDependentOperator::from_static(static_rabi(space, &p)?),
        HamiltonianSpec::LabFull(p) => lab_full(space, &p),
        HamiltonianSpec::RotatingFrame { params, order } => rotating_frame(space, &params, order),
        HamiltonianSpec::RwaTwoTone(e) => rwa_two_tone(space, &e),
        HamiltonianSpec::AnisotropicRabi(e) => TimeDependentOperator::from_static(anisotropic_rabi(space, &e)?),
        HamiltonianSpec::Effective3rdOrder(e) => TimeDependentOperator::from_static(build_effective(space, &e)?),
        HamiltonianSpec::ThreeLevelLab(p) => three_level_lab(space, &p),
        HamiltonianSpec::ThreeLevelRotating { params, order } => three_level_rotating(space, &params, order),
        HamiltonianSpec::ThreeLevelRwa(p) => three_level_rwa(space, &p),
        HamiltonianSpec::ThreeLevelUnmodulated(p) => three_level_unmodulated(space, &p),
    }
}

struct Ops {
    a: ComplexMatrix,
    ad: ComplexMatrix,
    n: ComplexMatrix,
}

impl Ops {
    fn new(space: &HilbertSpace) -> Self {
        let a = space.annihilation();
        let ad = a.adjoint();
        Self { n: space.number(), a, ad }
    }
}

fn need_levels(space: &HilbertSpace, levels: usize) -> Result<()> {
    if space.atom_levels() != levels {
        return Err(Error::InvalidSpace(format!(
            "form needs a {levels}-level atom, space has {}",
            space.atom_levels()
        )));
    }
    Ok(())
}

pub fn static_rabi(space: &HilbertSpace, p: &LabFrameParams) -> Result<ComplexMatrix> {
    need_levels(space, 2)?;
    let o = Ops::new(space);
    let sz = space.atom_operator(AtomOperator::SigmaZ)?;
    let sx = space.atom_operator(AtomOperator::SigmaX)?;
    let x = &o.a + &o.ad;
    Ok(&(&o.n.scale_real(p.omega_c) + &sz.scale_real(p.omega0 / 2.0)) + &x.matmul(&sx).scale_real(p.lambda))
}

pub fn lab_full(space: &HilbertSpace, p: &LabFrameParams) -> Result<TimeDependentOperator> {
    let mut op = TimeDependentOperator::from_static(static_rabi(space, p)?)?;
    if let Some(m) = p.modulation {
        // (A/2) cos(ω_f t) σ_z = (A/4) σ_z e^{iω_f t} + h.c.
        let sz = space.atom_operator(AtomOperator::SigmaZ)?;
        op.add_oscillating(sz, Coefficient::harmonic(m.amplitude / 4.0, m.omega_f))?;
    }
    Ok(op)
}

/// Sideband weights `J_n(x)` for `n = -order..=order`.
fn sidebands(x: f64, order: usize) -> Result<Vec<(i32, f64)>> {
    let j = bessel_j_orders(order, x)?;
    Ok((-(order as i32)..=order as i32)
        .map(|n| {
            let m = n.unsigned_abs() as usize;
            (n, if n < 0 && m % 2 == 1 { -j[m] } else { j[m] })
        })
        .collect())
}

pub fn rotating_frame(space: &HilbertSpace, p: &LabFrameParams, order: usize) -> Result<TimeDependentOperator> {
    need_levels(space, 2)?;
    if order < 1 {
        return Err(Error::InvalidParameter { name: "bessel_order", reason: "must be >= 1".into() });
    }
    let m = p.modulation.ok_or(Error::InvalidParameter {
        name: "omega_f",
        reason: "sideband expansion needs a modulated model".into(),
    })?;
    let o = Ops::new(space);
    let sp = space.atom_operator(AtomOperator::SigmaPlus)?;
    let adsp = o.ad.matmul(&sp);
    let asp = o.a.matmul(&sp);
    let mut op = TimeDependentOperator::zero(space.dim());
    for (n, jn) in sidebands(m.x(), order)? {
        let w1 = p.omega0 + p.omega_c + n as f64 * m.omega_f;
        let w2 = p.omega0 - p.omega_c + n as f64 * m.omega_f;
        op.add_oscillating(adsp.clone(), Coefficient::harmonic(p.lambda * jn, w1))?;
        op.add_oscillating(asp.clone(), Coefficient::harmonic(p.lambda * jn, w2))?;
    }
    Ok(op)
}

pub fn rwa_two_tone(space: &HilbertSpace, e: &EffectiveParams) -> Result<TimeDependentOperator> {
    need_levels(space, 2)?;
    let o = Ops::new(space);
    let sp = space.atom_operator(AtomOperator::SigmaPlus)?;
    let mut op = TimeDependentOperator::zero(space.dim());
    op.add_oscillating(o.ad.matmul(&sp), Coefficient::harmonic(e.lambda1, e.big_delta))?;
    op.add_oscillating(o.a.matmul(&sp), Coefficient::harmonic(e.lambda2, e.delta))?;
    Ok(op)
}

pub fn anisotropic_rabi(space: &HilbertSpace, e: &EffectiveParams) -> Result<ComplexMatrix> {
    need_levels(space, 2)?;
    let o = Ops::new(space);
    let sz = space.atom_operator(AtomOperator::SigmaZ)?;
    let sp = space.atom_operator(AtomOperator::SigmaPlus)?;
    let v = &o.ad.matmul(&sp).scale_real(e.lambda1) + &o.a.matmul(&sp).scale_real(e.lambda2);
    let free = &o.n.scale_real(e.omega_c) + &sz.scale_real(e.omega0 / 2.0);
    Ok(&(&free + &v) + &v.adjoint())
}

/// Effective Hamiltonian: free part, the second-order shifts
/// `λ₂²/δ (a†aσ_z + σ₊σ₋) + λ₁²/Δ (a†aσ_z − σ₋σ₊)` and the three-photon
/// coupling `−λ₂²λ₁/δ² (a³σ₊ + a†³σ₋)`.
pub fn build_effective(space: &HilbertSpace, e: &EffectiveParams) -> Result<ComplexMatrix> {
    need_levels(space, 2)?;
    let o = Ops::new(space);
    let sz = space.atom_operator(AtomOperator::SigmaZ)?;
    let sp = space.atom_operator(AtomOperator::SigmaPlus)?;
    let sm = space.atom_operator(AtomOperator::SigmaMinus)?;
    let nsz = o.n.matmul(&sz);
    let a3 = o.a.matmul(&o.a).matmul(&o.a);
    let three = a3.matmul(&sp);
    let mut h = &o.n.scale_real(e.omega_c) + &sz.scale_real(e.omega0 / 2.0);
    h += &(&nsz + &sp.matmul(&sm)).scale_real(e.lambda2 * e.lambda2 / e.delta);
    h += &(&nsz - &sm.matmul(&sp)).scale_real(e.lambda1 * e.lambda1 / e.big_delta);
    h += &(&three + &three.adjoint()).scale_real(-e.lambda2 * e.lambda2 * e.lambda1 / (e.delta * e.delta));
    Ok(h)
}

/// `λ₂/δ`, the small parameter of the effective expansion.
pub fn effective_expansion_ratio(e: &EffectiveParams) -> f64 {
    (e.lambda2 / e.delta).abs()
}

/// The effective Hamiltonian restricted to `{|e,0⟩, |g,3⟩}`. The `|g,3⟩`
/// diagonal is `3ω_c − ω₀/2 − 3λ₂²/δ − 4λ₁²/Δ`, the value the full
/// effective operator takes on that state.
pub fn effective_2x2(e: &EffectiveParams) -> ComplexMatrix {
    let l1 = e.lambda1;
    let l2s = e.lambda2 * e.lambda2;
    let off = -(6f64.sqrt()) * l2s * l1 / (e.delta * e.delta);
    let d0 = e.omega0 / 2.0 + l2s / e.delta;
    let d1 = 3.0 * e.omega_c - e.omega0 / 2.0 - 3.0 * l2s / e.delta - 4.0 * l1 * l1 / e.big_delta;
    ComplexMatrix::from_row_major(2, 2, vec![c64(d0, 0.0), c64(off, 0.0), c64(off, 0.0), c64(d1, 0.0)])
}

struct ThreeLevelOps {
    adeg: ComplexMatrix,
    aeg: ComplexMatrix,
    adfe: ComplexMatrix,
    afe: ComplexMatrix,
}

impl ThreeLevelOps {
    fn new(space: &HilbertSpace) -> Result<Self> {
        let o = Ops::new(space);
        let eg = space.transition(AtomLevel::E, AtomLevel::G)?;
        let fe = space.transition(AtomLevel::F, AtomLevel::E)?;
        Ok(Self { adeg: o.ad.matmul(&eg), aeg: o.a.matmul(&eg), adfe: o.ad.matmul(&fe), afe: o.a.matmul(&fe) })
    }
}

/// `[Ω₀ + A cos ω_f t]|e⟩⟨e| + [Ω_b + 2A cos ω_f t]|f⟩⟨f| + Ω_c a†a
///  + λ(a + a†)(|e⟩⟨g| + |f⟩⟨e| + h.c.)`
pub fn three_level_lab(space: &HilbertSpace, p: &ThreeLevelParams) -> Result<TimeDependentOperator> {
    need_levels(space, 3)?;
    let o = Ops::new(space);
    let ee = space.transition(AtomLevel::E, AtomLevel::E)?;
    let ff = space.transition(AtomLevel::F, AtomLevel::F)?;
    let eg = space.transition(AtomLevel::E, AtomLevel::G)?;
    let fe = space.transition(AtomLevel::F, AtomLevel::E)?;
    let ladder = &eg + &fe;
    let ladder = &ladder + &ladder.adjoint();
    let x = &o.a + &o.ad;
    let mut h = &(&ee.scale_real(p.omega0) + &ff.scale_real(p.omega_b)) + &o.n.scale_real(p.omega_c);
    h += &x.matmul(&ladder).scale_real(p.lambda);
    let mut op = TimeDependentOperator::from_static(h)?;
    if let Some(m) = p.modulation {
        let modulated = &ee + &ff.scale_real(2.0);
        op.add_oscillating(modulated, Coefficient::harmonic(m.amplitude / 2.0, m.omega_f))?;
    }
    Ok(op)
}

/// Sideband expansion of the three-level model in the frame
/// `exp[−i(Ω_c a†a + Ω₀|e⟩⟨e| + Ω_b|f⟩⟨f|)t − i x sin(ω_f t)(|e⟩⟨e| + 2|f⟩⟨f|)]`.
pub fn three_level_rotating(space: &HilbertSpace, p: &ThreeLevelParams, order: usize) -> Result<TimeDependentOperator> {
    need_levels(space, 3)?;
    if order < 1 {
        return Err(Error::InvalidParameter { name: "bessel_order", reason: "must be >= 1".into() });
    }
    let m = p.modulation.ok_or(Error::InvalidParameter {
        name: "omega_f",
        reason: "sideband expansion needs a modulated model".into(),
    })?;
    let t = ThreeLevelOps::new(space)?;
    let (delta, big_delta, db) = (p.delta(), p.big_delta(), p.delta_b());
    let mut op = TimeDependentOperator::zero(space.dim());
    for (n, jn) in sidebands(m.x(), order)? {
        let nf = n as f64 * m.omega_f;
        let amp = p.lambda * jn;
        op.add_oscillating(t.adeg.clone(), Coefficient::harmonic(amp, big_delta + m.omega_f + nf))?;
        op.add_oscillating(t.aeg.clone(), Coefficient::harmonic(amp, delta + nf))?;
        op.add_oscillating(t.adfe.clone(), Coefficient::harmonic(amp, db + big_delta + m.omega_f + nf))?;
        op.add_oscillating(t.afe.clone(), Coefficient::harmonic(amp, db + delta + nf))?;
    }
    Ok(op)
}

/// `λJ₋₁ a†|e⟩⟨g| e^{iΔt} + λJ₀ a|e⟩⟨g| e^{iδt} + h.c.` on the three-level space.
pub fn three_level_rwa(space: &HilbertSpace, p: &ThreeLevelParams) -> Result<TimeDependentOperator> {
    need_levels(space, 3)?;
    let t = ThreeLevelOps::new(space)?;
    let j = sidebands(p.x(), 1)?;
    let (jm1, j0) = (j[0].1, j[1].1);
    let mut op = TimeDependentOperator::zero(space.dim());
    op.add_oscillating(t.adeg, Coefficient::harmonic(p.lambda * jm1, p.big_delta()))?;
    op.add_oscillating(t.aeg, Coefficient::harmonic(p.lambda * j0, p.delta()))?;
    Ok(op)
}

/// `λ[a†|e⟩⟨g| e^{iΔt} + a|e⟩⟨g| e^{iδ′t} + a†|f⟩⟨e| e^{i(Δ+δ_b)t}
///  + a|f⟩⟨e| e^{i(δ′+δ_b)t} + h.c.]` with `Δ = Ω₀ + Ω_c`, `δ′ = Ω₀ − Ω_c`.
pub fn three_level_unmodulated(space: &HilbertSpace, p: &ThreeLevelParams) -> Result<TimeDependentOperator> {
    need_levels(space, 3)?;
    let t = ThreeLevelOps::new(space)?;
    let big_delta = p.omega0 + p.omega_c;
    let dp = p.delta_prime();
    let db = p.delta_b();
    let mut op = TimeDependentOperator::zero(space.dim());
    op.add_oscillating(t.adeg, Coefficient::harmonic(p.lambda, big_delta))?;
    op.add_oscillating(t.aeg, Coefficient::harmonic(p.lambda, dp))?;
    op.add_oscillating(t.adfe, Coefficient::harmonic(p.lambda, big_delta + db))?;
    op.add_oscillating(t.afe, Coefficient::harmonic(p.lambda, dp + db))?;
    Ok(op)
}

/// Free three-level Hamiltonian `Ω_c a†a + Ω₀|e⟩⟨e| + Ω_b|f⟩⟨f|` energies,
/// the frame in which [`three_level_unmodulated`] is written.
pub fn three_level_free_energies(space: &HilbertSpace, p: &ThreeLevelParams) -> Result<Vec<f64>> {
    need_levels(space, 3)?;
    Ok(space
        .labels()
        .iter()
        .map(|l| {
            let atom = match l.atom {
                AtomLevel::G => 0.0,
                AtomLevel::E => p.omega0,
                AtomLevel::F => p.omega_b,
            };
            atom + p.omega_c * l.photons as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisLabel;

    fn eff() -> EffectiveParams {
        EffectiveParams::new(1.0, 0.3335153, 0.01, 0.5).unwrap()
    }

    #[test]
    fn decoupled_anisotropic_is_diagonal() {
        let s = HilbertSpace::two_level(5).unwrap();
        let e = EffectiveParams::new(1.0, 0.3, 0.0, 0.5).unwrap();
        let h = anisotropic_rabi(&s, &e).unwrap();
        for (i, l) in s.labels().iter().enumerate() {
            let sign = if l.atom == AtomLevel::E { 0.5 } else { -0.5 };
            let expect = 0.3 * l.photons as f64 + sign;
            assert!((h[(i, i)].re - expect).abs() < 1e-15, "{i} {l} {} {expect}", h[(i, i)]);
            for j in 0..s.dim() {
                if j != i {
                    assert_eq!(h[(i, j)], c64(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn two_tone_matrix_elements_at_zero() {
        let s = HilbertSpace::two_level(5).unwrap();
        let e = eff();
        let h = build(&HamiltonianSpec::RwaTwoTone(e), &s).unwrap().evaluate(0.0);
        let i = |l, n| s.index(BasisLabel::new(l, n)).unwrap();
        assert!((h[(i(AtomLevel::E, 0), i(AtomLevel::G, 1))].re - e.lambda2).abs() < 1e-15);
        assert!((h[(i(AtomLevel::E, 1), i(AtomLevel::G, 0))].re - e.lambda1).abs() < 1e-15);
    }

    #[test]
    fn unmodulated_lab_equals_static_rabi() {
        let s = HilbertSpace::two_level(6).unwrap();
        let p = LabFrameParams::new(100.0, 99.3, 0.01, 0.0, 198.0).unwrap();
        let full = build(&HamiltonianSpec::LabFull(p), &s).unwrap().evaluate(0.0);
        let rabi = static_rabi(&s, &p).unwrap();
        assert!(full.max_abs_diff(&rabi) < 1e-15);
    }

    #[test]
    fn effective_three_photon_element() {
        let s = HilbertSpace::two_level(8).unwrap();
        let e = eff();
        let h = build_effective(&s, &e).unwrap();
        let g3 = s.index(BasisLabel::new(AtomLevel::G, 3)).unwrap();
        let e0 = s.index(BasisLabel::new(AtomLevel::E, 0)).unwrap();
        let expect = -(6f64.sqrt()) * e.lambda2 * e.lambda2 * e.lambda1 / (e.delta * e.delta);
        assert!((h[(g3, e0)].re - expect).abs() < 1e-18);
        let two = effective_2x2(&e);
        assert!((h[(e0, e0)] - two[(0, 0)]).norm() < 1e-15);
        assert!((h[(g3, g3)] - two[(1, 1)]).norm() < 1e-15);
    }

    #[test]
    fn wrong_space_rejected() {
        let s3 = HilbertSpace::three_level(5).unwrap();
        assert!(build(&HamiltonianSpec::AnisotropicRabi(eff()), &s3).is_err());
        let s2 = HilbertSpace::two_level(5).unwrap();
        let tl = ThreeLevelParams::new(1.0, 0.6, 0.34, 0.01, None).unwrap();
        assert!(build(&HamiltonianSpec::ThreeLevelUnmodulated(tl), &s2).is_err());
        let p = LabFrameParams::new(100.0, 99.3, 0.01, 99.0, 198.0).unwrap();
        assert!(build(&HamiltonianSpec::RotatingFrame { params: p, order: 0 }, &s2).is_err());
    }
}
