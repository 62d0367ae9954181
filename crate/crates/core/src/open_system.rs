//! Lindblad master equation with dressed-state jump operators, and the
//! cavity output flux `Φ = κ Tr[ρ X₁†X₁]`.
//!
//! The density matrix is integrated in a diagonal rotating frame (the same
//! frames used for state vectors), where a modulated lab Hamiltonian becomes
//! periodic with slow residual energies. For periodic generators the
//! one-period map is built once on the parity-conserving block and applied
//! stroboscopically.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::frames::{LabFrameParams, RotatingFrame};
use crate::hamiltonians::{lab_full, static_rabi, TimeDependentOperator};
use crate::hilbert::{AtomLevel, AtomOperator, BasisLabel, HilbertSpace};
use crate::linalg::{c64, eig_hermitian, ComplexMatrix, SparseMatrix, StateVector, C64};
use crate::{Error, Result};

/// Relative gap below which two dressed levels count as degenerate.
pub const DEGENERACY_REL_TOL: f64 = 1e-10;
/// Jump-operator entries below this fraction of the largest are dropped.
pub const SPARSE_REL_TOL: f64 = 1e-14;
/// Most negative eigenvalue tolerated before a run is aborted.
pub const POSITIVITY_ABORT: f64 = -1e-6;
/// Fraction of the run averaged for the steady flux.
pub const FINAL_WINDOW: f64 = 0.2;
/// Largest relative drift of the window average still called stationary.
pub const STATIONARY_DRIFT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationParams {
    pub kappa: f64,
    pub gamma: f64,
}

impl DissipationParams {
    pub fn new(kappa: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("gamma", gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {v}") });
            }
        }
        Ok(Self { kappa, gamma })
    }
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: ComplexMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const POSITIVITY_TOL: f64 = -1e-8;

    pub fn new(entries: ComplexMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::NotSquare { rows: entries.rows(), cols: entries.cols() });
        }
        let defect = entries.hermiticity_defect();
        if defect > Self::HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect, tolerance: Self::HERMITIAN_TOL });
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::InvalidParameter { name: "rho", reason: format!("trace {tr} is not 1") });
        }
        let rho = Self { entries };
        let min = rho.min_eigenvalue()?;
        if min < Self::POSITIVITY_TOL {
            return Err(Error::Positivity { min_eigenvalue: min, time: 0.0, dt: 0.0 });
        }
        Ok(rho)
    }

    pub fn pure(psi: &StateVector) -> Result<Self> {
        Self::new(psi.normalized().projector())
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_hermitian(&hermitian_part(&self.entries))?.values[0])
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        self.entries.matmul(op).trace()
    }
}

fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Dressed lowering operators built in the eigenbasis of a static
/// Hamiltonian.
#[derive(Clone, Debug)]
pub struct JumpOperators {
    /// From `a + a†`.
    pub x1: ComplexMatrix,
    /// From `σ_x`.
    pub x2: ComplexMatrix,
    /// Eigenvalues of the static Hamiltonian, ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: ComplexMatrix,
    /// `(m, n)` pairs left out because `|E_n − E_m|` is below the degeneracy
    /// tolerance.
    pub excluded_pairs: Vec<(usize, usize)>,
}

/// `X = Σ_{E_n > E_m} ⟨ψ_m|O|ψ_n⟩ |ψ_m⟩⟨ψ_n|` for `O = a + a†` and `O = σ_x`.
pub fn dressed_jump_operators(h_r: &ComplexMatrix, space: &HilbertSpace) -> Result<JumpOperators> {
    if h_r.rows() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: h_r.rows() });
    }
    let eig = eig_hermitian(h_r)?;
    let v = &eig.vectors;
    let vd = v.adjoint();
    let q = vd.matmul(&space.quadrature()).matmul(v);
    let sx = vd.matmul(&space.atom_operator(AtomOperator::SigmaX)?).matmul(v);
    let n = space.dim();
    let scale = h_r.max_abs().max(f64::MIN_POSITIVE);
    let mut x1e = ComplexMatrix::zeros(n, n);
    let mut x2e = ComplexMatrix::zeros(n, n);
    let mut excluded_pairs = Vec::new();
    for m in 0..n {
        for k in (m + 1)..n {
            let gap = eig.values[k] - eig.values[m];
            if gap.abs() < DEGENERACY_REL_TOL * scale {
                if q[(m, k)].norm() > 0.0 || sx[(m, k)].norm() > 0.0 {
                    excluded_pairs.push((m, k));
                }
                continue;
            }
            x1e[(m, k)] = q[(m, k)];
            x2e[(m, k)] = sx[(m, k)];
        }
    }
    Ok(JumpOperators {
        x1: v.matmul(&x1e).matmul(&vd),
        x2: v.matmul(&x2e).matmul(&vd),
        energies: eig.values.clone(),
        eigenvectors: eig.vectors,
        excluded_pairs,
    })
}

/// `D[O]ρ = OρO† − ½(O†Oρ + ρO†O)`
pub fn dissipator(o: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let od = o.adjoint();
    let odo = od.matmul(o);
    let mut out = o.matmul(rho).matmul(&od);
    let anti = &odo.matmul(rho) + &rho.matmul(&odo);
    out -= &anti.scale_real(0.5);
    out
}

/// `−i[H, ρ] + κ D[X₁]ρ + γ D[X₂]ρ`, dense reference form.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &ComplexMatrix,
    x1: &ComplexMatrix,
    x2: &ComplexMatrix,
    d: &DissipationParams,
) -> Result<ComplexMatrix> {
    let n = rho.dim();
    for m in [h, x1, x2] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.rows() });
        }
    }
    let r = rho.entries();
    let mut out = h.commutator(r).scale(c64(0.0, -1.0));
    out += &dissipator(x1, r).scale_real(d.kappa);
    out += &dissipator(x2, r).scale_real(d.gamma);
    Ok(out)
}

/// Lindblad generator in a diagonal frame, with sparse jump operators.
pub struct FramedLindblad<'a> {
    op: &'a TimeDependentOperator,
    frame: RotatingFrame,
    x1: SparseMatrix,
    x2: SparseMatrix,
    /// `κX₁†X₁ + γX₂†X₂`
    loss: SparseMatrix,
    /// `X₁†X₁`
    x1dx1: ComplexMatrix,
    d: DissipationParams,
}

impl<'a> FramedLindblad<'a> {
    pub fn new(
        op: &'a TimeDependentOperator,
        frame: RotatingFrame,
        jumps: &JumpOperators,
        d: DissipationParams,
    ) -> Result<Self> {
        let n = op.dim();
        if frame.dim() != n || jumps.x1.rows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: frame.dim() });
        }
        let x1dx1 = jumps.x1.adjoint().matmul(&jumps.x1);
        let loss = &x1dx1.scale_real(d.kappa) + &jumps.x2.adjoint().matmul(&jumps.x2).scale_real(d.gamma);
        Ok(Self {
            op,
            frame,
            x1: SparseMatrix::from_dense_relative(&jumps.x1, SPARSE_REL_TOL),
            x2: SparseMatrix::from_dense_relative(&jumps.x2, SPARSE_REL_TOL),
            loss: SparseMatrix::from_dense_relative(&loss, SPARSE_REL_TOL),
            x1dx1,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn frame(&self) -> &RotatingFrame {
        &self.frame
    }

    /// Lab density matrix from its frame representation.
    pub fn to_lab(&self, t: f64, rho_f: &ComplexMatrix) -> ComplexMatrix {
        let p = self.frame.phase_factors(t);
        ComplexMatrix::from_fn(rho_f.rows(), rho_f.cols(), |i, j| p[i].conj() * rho_f[(i, j)] * p[j])
    }

    pub fn from_lab(&self, t: f64, rho: &ComplexMatrix) -> ComplexMatrix {
        let p = self.frame.phase_factors(t);
        ComplexMatrix::from_fn(rho.rows(), rho.cols(), |i, j| p[i] * rho[(i, j)] * p[j].conj())
    }

    /// `κ Tr[ρ X₁†X₁]` for a lab-frame `ρ`.
    pub fn flux(&self, rho_lab: &ComplexMatrix) -> f64 {
        self.d.kappa * rho_lab.matmul(&self.x1dx1).trace().re
    }

    /// `κ Tr[ρ X₁†X₁]` for the lab state whose frame representation at `t`
    /// is `rho_f`, extended linearly to non-Hermitian `rho_f`.
    fn flux_framed_complex(&self, t: f64, rho_f: &ComplexMatrix) -> C64 {
        let p = self.frame.phase_factors(t);
        let n = self.dim();
        let mut acc = c64(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let m = self.x1dx1[(j, i)];
                if m.re != 0.0 || m.im != 0.0 {
                    acc += p[i].conj() * rho_f[(i, j)] * p[j] * m;
                }
            }
        }
        acc * self.d.kappa
    }

    /// Time derivative of the frame density matrix.
    pub fn rhs(&self, t: f64, rho_f: &ComplexMatrix, out: &mut ComplexMatrix, tmp: &mut ComplexMatrix) {
        let n = self.dim();
        let rho = self.to_lab(t, rho_f);
        for z in out.as_mut_slice() {
            *z = c64(0.0, 0.0);
        }
        let mi = c64(0.0, -1.0);
        let pi = c64(0.0, 1.0);
        self.op.for_each_offdiag(t, |c, m| {
            m.mul_dense_add(mi * c, &rho, out);
            m.dense_mul_add(pi * c, &rho, out);
        });
        for (x, rate) in [(&self.x1, self.d.kappa), (&self.x2, self.d.gamma)] {
            if rate == 0.0 || x.nnz() == 0 {
                continue;
            }
            for z in tmp.as_mut_slice() {
                *z = c64(0.0, 0.0);
            }
            x.mul_dense_add(c64(1.0, 0.0), &rho, tmp);
            x.dense_mul_adjoint_add(c64(rate, 0.0), tmp, out);
        }
        self.loss.mul_dense_add(c64(-0.5, 0.0), &rho, out);
        self.loss.dense_mul_add(c64(-0.5, 0.0), &rho, out);
        let p = self.frame.phase_factors(t);
        let w = self.frame.phase_rates(t);
        let h = self.op.diagonal(t);
        for i in 0..n {
            for j in 0..n {
                let v = out[(i, j)];
                let detune = (h[i] - w[i]) - (h[j] - w[j]);
                out[(i, j)] = p[i] * v * p[j].conj() + mi * detune * rho_f[(i, j)];
            }
        }
    }

    fn rk4_step(&self, t: f64, h: f64, rho: &mut ComplexMatrix, w: &mut MasterWork) {
        let MasterWork { k, tmp, stage } = w;
        let n2 = rho.as_slice().len();
        self.rhs(t, rho, &mut k[0], tmp);
        for idx in 0..n2 {
            stage.as_mut_slice()[idx] = rho.as_slice()[idx] + k[0].as_slice()[idx] * (h / 2.0);
        }
        self.rhs(t + h / 2.0, stage, &mut k[1], tmp);
        for idx in 0..n2 {
            stage.as_mut_slice()[idx] = rho.as_slice()[idx] + k[1].as_slice()[idx] * (h / 2.0);
        }
        self.rhs(t + h / 2.0, stage, &mut k[2], tmp);
        for idx in 0..n2 {
            stage.as_mut_slice()[idx] = rho.as_slice()[idx] + k[2].as_slice()[idx] * h;
        }
        self.rhs(t + h, stage, &mut k[3], tmp);
        let r = rho.as_mut_slice();
        for idx in 0..n2 {
            r[idx] += (k[0].as_slice()[idx] + (k[1].as_slice()[idx] + k[2].as_slice()[idx]) * 2.0 + k[3].as_slice()[idx])
                * (h / 6.0);
        }
    }

    /// Step from the fastest framed frequency and the dissipative rates.
    pub fn default_dt(&self) -> f64 {
        let w = self.op.framed_max_frequency(&self.frame);
        let rate = self.loss.entries().map(|(_, _, z)| z.norm()).fold(0.0, f64::max);
        2.0 * core::f64::consts::PI / w.max(rate).max(1e-12) / crate::dynamics::STEPS_PER_FASTEST_PERIOD
    }
}

struct MasterWork {
    k: [ComplexMatrix; 4],
    tmp: ComplexMatrix,
    stage: ComplexMatrix,
}

impl MasterWork {
    fn new(n: usize) -> Self {
        let z = ComplexMatrix::zeros(n, n);
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z.clone(), stage: z }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MasterMethod {
    /// RK4 over the whole run.
    Direct,
    /// One-period map on the parity-conserving block, applied repeatedly.
    Stroboscopic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterConfig {
    pub t_final: f64,
    /// Target number of samples.
    pub samples: usize,
    pub dt: Option<f64>,
    pub method: MasterMethod,
}

/// Output of a master-equation run, all in the lab frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxTrajectory {
    pub times: Vec<f64>,
    pub flux: Vec<f64>,
    /// Flux averaged over the drive period starting at each sample
    /// (stroboscopic runs only).
    pub cycle_flux: Option<Vec<f64>>,
    pub trace: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub hermiticity: Vec<f64>,
    pub final_rho: ComplexMatrix,
}

impl FluxTrajectory {
    pub fn max_trace_drift(&self) -> f64 {
        self.trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoidal integral of the flux over `[t_from, t_final]`.
    pub fn integrated_flux(&self, t_from: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.times.len() {
            if self.times[k - 1] >= t_from {
                acc += 0.5 * (self.flux[k] + self.flux[k - 1]) * (self.times[k] - self.times[k - 1]);
            }
        }
        acc
    }

    /// Mean flux over the final [`FINAL_WINDOW`] of the run, with the
    /// relative difference between the window's two halves.
    pub fn steady(&self) -> SteadyFlux {
        let t_end = *self.times.last().unwrap_or(&0.0);
        let t_from = t_end * (1.0 - FINAL_WINDOW);
        let t_mid = t_end * (1.0 - FINAL_WINDOW / 2.0);
        let series = self.cycle_flux.as_ref().unwrap_or(&self.flux);
        let mean = |lo: f64, hi: f64| {
            let v: Vec<f64> = self
                .times
                .iter()
                .zip(series)
                .filter(|(t, _)| **t >= lo && **t <= hi)
                .map(|(_, f)| *f)
                .collect();
            if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
        };
        let value = mean(t_from, t_end);
        let a = mean(t_from, t_mid);
        let b = mean(t_mid, t_end);
        let drift = if value.abs() > 0.0 { (a - b).abs() / value.abs() } else { 0.0 };
        SteadyFlux { value, drift, converged: drift <= STATIONARY_DRIFT, window_start: t_from }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyFlux {
    pub value: f64,
    pub drift: f64,
    pub converged: bool,
    pub window_start: f64,
}

/// Evolves `rho0` (lab frame, `t = 0`) under `L` and records the output flux.
pub fn propagate_master(l: &FramedLindblad, space: &HilbertSpace, rho0: &DensityMatrix, cfg: &MasterConfig) -> Result<FluxTrajectory> {
    let n = l.dim();
    if rho0.dim() != n || space.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho0.dim() });
    }
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::InvalidParameter { name: "t_final", reason: format!("{}", cfg.t_final) });
    }
    let dt = cfg.dt.unwrap_or_else(|| l.default_dt());
    let mut out = FluxTrajectory {
        times: Vec::new(),
        flux: Vec::new(),
        cycle_flux: None,
        trace: Vec::new(),
        min_eigenvalue: Vec::new(),
        hermiticity: Vec::new(),
        final_rho: ComplexMatrix::zeros(n, n),
    };
    let record = |out: &mut FluxTrajectory, t: f64, rho_f: &ComplexMatrix, step: f64| -> Result<()> {
        let rho = l.to_lab(t, rho_f);
        let min = eig_hermitian(&hermitian_part(&rho))?.values[0];
        if min < POSITIVITY_ABORT || !min.is_finite() {
            return Err(Error::Positivity { min_eigenvalue: min, time: t, dt: step });
        }
        out.times.push(t);
        out.flux.push(l.flux(&rho));
        out.trace.push(rho.trace().re);
        out.min_eigenvalue.push(min);
        out.hermiticity.push(rho.hermiticity_defect());
        out.final_rho = rho;
        Ok(())
    };
    let mut rho_f = l.from_lab(0.0, rho0.entries());
    match cfg.method {
        MasterMethod::Direct => {
            let steps = (cfg.t_final / dt).ceil() as u64;
            let h = cfg.t_final / steps as f64;
            let stride = (steps / cfg.samples.max(1) as u64).max(1);
            let mut w = MasterWork::new(n);
            record(&mut out, 0.0, &rho_f, h)?;
            for s in 0..steps {
                l.rk4_step(s as f64 * h, h, &mut rho_f, &mut w);
                if (s + 1) % stride == 0 || s + 1 == steps {
                    record(&mut out, (s + 1) as f64 * h, &rho_f, h)?;
                }
            }
        }
        MasterMethod::Stroboscopic => {
            let period = l
                .frame
                .period
                .ok_or_else(|| Error::InvalidParameter { name: "frame", reason: "no period".to_string() })?;
            let block = ParityBlock::new(space);
            block.check(&rho_f)?;
            let map = period_map(l, &block, period, dt)?;
            let periods = (cfg.t_final / period).ceil().max(1.0) as u64;
            let stride = (periods / cfg.samples.max(1) as u64).max(1);
            let step = map.power(stride);
            let mut v = block.pack(&rho_f);
            let h = period / (period / dt).ceil();
            let cycle = |v: &[C64]| -> f64 { v.iter().zip(&map.cycle_flux).map(|(a, b)| (a * b).re).sum() };
            let mut cycle_flux = vec![cycle(&v)];
            record(&mut out, 0.0, &rho_f, h)?;
            let mut k = 0;
            while k < periods {
                v = step.mul_vec(&v);
                k += stride;
                rho_f = block.unpack(&v);
                record(&mut out, k as f64 * period, &rho_f, h)?;
                cycle_flux.push(cycle(&v));
            }
            out.cycle_flux = Some(cycle_flux);
        }
    }
    Ok(out)
}

/// A flux experiment: lab-frame modulated Rabi model, dressed jump
/// operators of its static part, initial state `|e,0⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxSetup {
    pub lab: LabFrameParams,
    pub dissipation: DissipationParams,
    pub fock_cutoff: usize,
    pub t_final: f64,
    pub samples: usize,
    pub method: MasterMethod,
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluxRun {
    pub setup: FluxSetup,
    pub trajectory: FluxTrajectory,
    pub steady: SteadyFlux,
    pub excluded_pairs: Vec<(usize, usize)>,
    pub period: Option<f64>,
}

/// Runs the master equation for `setup` and averages the late-time flux.
pub fn run_flux(setup: &FluxSetup) -> Result<FluxRun> {
    let space = HilbertSpace::two_level(setup.fock_cutoff)?;
    let lab = setup.lab;
    lab.validate()?;
    let bare = LabFrameParams { modulation: None, ..lab };
    let jumps = dressed_jump_operators(&static_rabi(&space, &bare)?, &space)?;
    let op = lab_full(&space, &lab)?;
    let frame = RotatingFrame::co_moving(&space, lab.modulation, lab.omega0)?;
    let period = frame.period;
    let l = FramedLindblad::new(&op, frame, &jumps, setup.dissipation)?;
    let rho0 = DensityMatrix::pure(&space.basis_state(BasisLabel::new(AtomLevel::E, 0))?)?;
    let cfg = MasterConfig { t_final: setup.t_final, samples: setup.samples, dt: setup.dt, method: setup.method };
    let trajectory = propagate_master(&l, &space, &rho0, &cfg)?;
    let steady = trajectory.steady();
    Ok(FluxRun { setup: *setup, trajectory, steady, excluded_pairs: jumps.excluded_pairs, period })
}

/// Late-time average of the output flux for `setup`.
pub fn steady_flux(setup: &FluxSetup) -> Result<SteadyFlux> {
    Ok(run_flux(setup)?.steady)
}

/// Index set of the entries `ρ_ij` with equal parity of `i` and `j`.
struct ParityBlock {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl ParityBlock {
    fn new(space: &HilbertSpace) -> Self {
        let n = space.dim();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if space.parity(i) == space.parity(j) {
                    pairs.push((i, j));
                }
            }
        }
        Self { n, pairs }
    }

    fn check(&self, rho: &ComplexMatrix) -> Result<()> {
        let inside: f64 = self.pairs.iter().map(|&(i, j)| rho[(i, j)].norm_sqr()).sum();
        let total: f64 = rho.as_slice().iter().map(|z| z.norm_sqr()).sum();
        if total - inside > 1e-24 * total.max(1.0) {
            return Err(Error::SectorMixing("initial state has parity coherences".to_string()));
        }
        Ok(())
    }

    fn pack(&self, rho: &ComplexMatrix) -> Vec<C64> {
        self.pairs.iter().map(|&(i, j)| rho[(i, j)]).collect()
    }

    fn unpack(&self, v: &[C64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.n, self.n);
        for (&(i, j), &z) in self.pairs.iter().zip(v) {
            m[(i, j)] = z;
        }
        m
    }
}

/// One-period map on the parity block, column by column, together with the
/// linear functional giving the period-averaged flux of the initial element.
fn period_map(l: &FramedLindblad, block: &ParityBlock, period: f64, dt: f64) -> Result<StroboscopicMap> {
    let steps = (period / dt).ceil().max(1.0) as usize;
    let h = period / steps as f64;
    let n = l.dim();
    let m = block.pairs.len();
    let mut w = MasterWork::new(n);
    let mut cols = vec![c64(0.0, 0.0); m * m];
    let mut cycle_flux = vec![c64(0.0, 0.0); m];
    for (c, &(i, j)) in block.pairs.iter().enumerate() {
        let mut rho = ComplexMatrix::zeros(n, n);
        rho[(i, j)] = c64(1.0, 0.0);
        // trapezoidal average, exact for band-limited periodic integrands
        let mut avg = 0.5 * l.flux_framed_complex(0.0, &rho);
        for s in 0..steps {
            l.rk4_step(s as f64 * h, h, &mut rho, &mut w);
            let f = l.flux_framed_complex((s + 1) as f64 * h, &rho);
            avg += if s + 1 == steps { f * 0.5 } else { f };
        }
        cycle_flux[c] = avg / steps as f64;
        let leak: f64 = rho.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>()
            - block.pairs.iter().map(|&(a, b)| rho[(a, b)].norm_sqr()).sum::<f64>();
        if leak > 1e-20 {
            return Err(Error::SectorMixing(format!("parity coherence {leak:e} generated from element ({i}, {j})")));
        }
        for (r, &(a, b)) in block.pairs.iter().enumerate() {
            cols[r * m + c] = rho[(a, b)];
        }
    }
    Ok(StroboscopicMap { matrix: ComplexMatrix::from_row_major(m, m, cols), cycle_flux })
}

struct StroboscopicMap {
    matrix: ComplexMatrix,
    /// Period-averaged flux per unit of each packed element (complex, since
    /// single elements are not Hermitian).
    cycle_flux: Vec<C64>,
}

impl StroboscopicMap {
    fn power(&self, mut k: u64) -> ComplexMatrix {
        let n = self.matrix.rows();
        let mut result = ComplexMatrix::identity(n);
        let mut base = self.matrix.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photon_decay() {
        let space = HilbertSpace::two_level(8).unwrap();
        let a = space.annihilation();
        let zero = ComplexMatrix::zeros(space.dim(), space.dim());
        let one = space.basis_state(BasisLabel::new(AtomLevel::G, 1)).unwrap();
        let vac = space.basis_state(BasisLabel::new(AtomLevel::G, 0)).unwrap();
        let rho = DensityMatrix::pure(&one).unwrap();
        let d = DissipationParams::new(0.7, 0.0).unwrap();
        let drho = lindblad_rhs(&rho, &zero, &a, &zero, &d).unwrap();
        let expect = &vac.projector().scale_real(0.7) - &one.projector().scale_real(0.7);
        assert!(drho.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn rejects_invalid_density_matrices() {
        assert!(DensityMatrix::new(ComplexMatrix::from_diag(&[0.5, 0.6])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_diag(&[1.5, -0.5])).is_err());
        assert!(DissipationParams::new(-1.0, 0.0).is_err());
    }
}
