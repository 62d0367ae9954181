//! Schrödinger propagation: fixed-step RK4, adaptive Dormand–Prince, exact
//! evolution under static Hamiltonians, and stroboscopic evolution through a
//! one-period propagator for periodic generators.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::analytics;
use crate::frames::{from_effective, EffectiveParams, LabFrameParams, Modulation, RotatingFrame};
use crate::hamiltonians::{anisotropic_rabi, rotating_frame, static_rabi, three_level_lab, ThreeLevelParams,
    TimeDependentOperator};
use crate::hilbert::{AtomLevel, BasisLabel, HilbertSpace};
use crate::linalg::{c64, eig_hermitian, ComplexMatrix, EigenDecomposition, StateVector, C64};
use crate::spectral::{self, golden_section_min, locate_crossing_with, E0, G3};
use crate::{Error, Result};

/// Steps per period of the fastest frequency for the default RK4 step.
pub const STEPS_PER_FASTEST_PERIOD: f64 = 40.0;
/// Norm drift at which a run is aborted.
pub const NORM_ABORT: f64 = 1e-4;
/// Norm drift a completed run is expected to stay under.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Rk4Fixed,
    RkAdaptive,
}

/// For [`Integrator::Rk4Fixed`] `dt` is the step (default `2π/ω_max/40`) and a
/// sample is taken every `sample_stride` steps. For
/// [`Integrator::RkAdaptive`] `dt` is the output spacing, also thinned by
/// `sample_stride`, and `tolerance` bounds the local error per step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationConfig {
    pub integrator: Integrator,
    pub dt: Option<f64>,
    pub tolerance: f64,
    pub t_final: f64,
    pub sample_stride: usize,
}

impl PropagationConfig {
    pub fn rk4(t_final: f64, sample_stride: usize) -> Self {
        Self { integrator: Integrator::Rk4Fixed, dt: None, tolerance: 1e-10, t_final, sample_stride }
    }

    pub fn adaptive(t_final: f64, output_dt: f64, tolerance: f64) -> Self {
        Self { integrator: Integrator::RkAdaptive, dt: Some(output_dt), tolerance, t_final, sample_stride: 1 }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt: Some(dt), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", format!("{}", self.t_final)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("dt", format!("must be > 0, got {dt}")));
            }
        }
        if self.integrator == Integrator::RkAdaptive {
            if self.dt.is_none() {
                return Err(invalid("dt", "adaptive runs need an output spacing".to_string()));
            }
            if !(self.tolerance > 1e-14 && self.tolerance < 1e-6) {
                return Err(invalid("tolerance", format!("{} outside (1e-14, 1e-6)", self.tolerance)));
            }
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// A population to record along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Basis(BasisLabel),
    /// Total population of one atomic level, summed over photon numbers.
    AtomTotal(AtomLevel),
    /// `|⟨state|ψ⟩|²` against a lab-frame state.
    State { name: String, state: StateVector },
}

impl Channel {
    pub fn name(&self) -> String {
        match self {
            Channel::Basis(l) => format!("P({l})"),
            Channel::AtomTotal(a) => format!("P_{}_total", a.symbol()),
            Channel::State { name, .. } => format!("P({name})"),
        }
    }
}

enum Resolved {
    Indices(Vec<usize>),
    State(StateVector),
}

struct ChannelSet {
    names: Vec<String>,
    resolved: Vec<Resolved>,
    needs_lab: bool,
}

impl ChannelSet {
    fn new(space: Option<&HilbertSpace>, dim: usize, channels: &[Channel]) -> Result<Self> {
        let mut resolved = Vec::with_capacity(channels.len());
        let mut needs_lab = false;
        for c in channels {
            resolved.push(match c {
                Channel::Basis(l) => {
                    let s = space.ok_or_else(|| Error::InvalidLabel(format!("{l} needs a Hilbert space")))?;
                    Resolved::Indices(vec![s.index(*l)?])
                }
                Channel::AtomTotal(a) => {
                    let s = space.ok_or_else(|| Error::InvalidLabel(format!("{} needs a Hilbert space", c.name())))?;
                    if a.index() >= s.atom_levels() {
                        return Err(Error::InvalidLabel(format!("level {} absent", a.symbol())));
                    }
                    Resolved::Indices((0..s.fock_dim()).map(|n| a.index() * s.fock_dim() + n).collect())
                }
                Channel::State { state, .. } => {
                    if state.dim() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, found: state.dim() });
                    }
                    needs_lab = true;
                    Resolved::State(state.clone())
                }
            });
        }
        Ok(Self { names: channels.iter().map(Channel::name).collect(), resolved, needs_lab })
    }

    fn evaluate(&self, psi: &[C64], lab: Option<&[C64]>, out: &mut [Vec<f64>]) {
        for (r, series) in self.resolved.iter().zip(out.iter_mut()) {
            let p = match r {
                Resolved::Indices(ix) => ix.iter().map(|&i| psi[i].norm_sqr()).sum(),
                Resolved::State(s) => {
                    let v = lab.unwrap_or(psi);
                    s.0.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
                }
            };
            series.push(p);
        }
    }
}

/// Sampled populations and norms of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub channel_names: Vec<String>,
    /// `probabilities[c][k]` is channel `c` at `times[k]`.
    pub probabilities: Vec<Vec<f64>>,
    pub norm: Vec<f64>,
    /// Final state in the lab frame.
    pub final_state: StateVector,
}

impl TrajectoryRecord {
    fn new(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            times: Vec::new(),
            channel_names: names,
            probabilities: vec![Vec::new(); n],
            norm: Vec::new(),
            final_state: StateVector(Vec::new()),
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channel_names.iter().position(|n| n == name).map(|i| self.probabilities[i].as_slice())
    }

    /// Maximum of a channel and the time it occurs.
    pub fn max_of(&self, name: &str) -> Option<(f64, f64)> {
        let series = self.channel(name)?;
        series
            .iter()
            .zip(&self.times)
            .fold(None, |best: Option<(f64, f64)>, (&p, &t)| match best {
                Some((bp, _)) if bp >= p => best,
                _ => Some((p, t)),
            })
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (1.0 - n).abs()).fold(0.0, f64::max)
    }

    fn record(&mut self, set: &ChannelSet, t: f64, psi: &[C64], lab: Option<&[C64]>) {
        self.times.push(t);
        set.evaluate(psi, lab, &mut self.probabilities);
        self.norm.push(norm(psi));
    }
}

/// `H(t)`, optionally written in a diagonal rotating frame.
#[derive(Clone, Copy, Debug)]
pub struct Generator<'a> {
    op: &'a TimeDependentOperator,
    frame: Option<&'a RotatingFrame>,
}

impl<'a> Generator<'a> {
    pub fn lab(op: &'a TimeDependentOperator) -> Self {
        Self { op, frame: None }
    }

    pub fn framed(op: &'a TimeDependentOperator, frame: &'a RotatingFrame) -> Result<Self> {
        if frame.dim() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), found: frame.dim() });
        }
        Ok(Self { op, frame: Some(frame) })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn frame(&self) -> Option<&'a RotatingFrame> {
        self.frame
    }

    /// `y = G(t) x`
    pub fn apply(&self, t: f64, x: &[C64], y: &mut [C64], scratch: &mut [C64]) {
        match self.frame {
            None => self.op.apply(t, x, y),
            Some(f) => self.op.apply_framed(t, f, x, y, scratch),
        }
    }

    pub fn max_frequency(&self) -> f64 {
        match self.frame {
            None => self.op.framed_max_frequency(&RotatingFrame::identity(self.dim())),
            Some(f) => self.op.framed_max_frequency(f),
        }
    }

    /// `2π/ω_max/40`
    pub fn default_dt(&self) -> f64 {
        let w = self.max_frequency().max(1e-12);
        2.0 * PI / w / STEPS_PER_FASTEST_PERIOD
    }

    pub fn to_lab(&self, t: f64, psi: &[C64]) -> Vec<C64> {
        match self.frame {
            None => psi.to_vec(),
            Some(f) => f.to_lab(t, psi),
        }
    }

    pub fn from_lab(&self, t: f64, psi: &[C64]) -> Vec<C64> {
        match self.frame {
            None => psi.to_vec(),
            Some(f) => f.from_lab(t, psi),
        }
    }

    /// Dense generator matrix at `t`.
    pub fn matrix(&self, t: f64) -> ComplexMatrix {
        match self.frame {
            None => self.op.evaluate(t),
            Some(f) => self.op.evaluate_framed(t, f),
        }
    }
}

fn norm(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

/// Scratch space for one RK4 step.
struct Rk4Work {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
    scratch: Vec<C64>,
}

impl Rk4Work {
    fn new(dim: usize) -> Self {
        let z = vec![c64(0.0, 0.0); dim];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z.clone(), scratch: z }
    }
}

fn rk4_step(g: &Generator, t: f64, h: f64, psi: &mut [C64], w: &mut Rk4Work) {
    let Rk4Work { k, tmp, scratch } = w;
    let [k1, k2, k3, k4] = k;
    g.apply(t, psi, k1, scratch);
    for i in 0..psi.len() {
        tmp[i] = psi[i] + k1[i] * MINUS_I * (h / 2.0);
    }
    g.apply(t + h / 2.0, tmp, k2, scratch);
    for i in 0..psi.len() {
        tmp[i] = psi[i] + k2[i] * MINUS_I * (h / 2.0);
    }
    g.apply(t + h / 2.0, tmp, k3, scratch);
    for i in 0..psi.len() {
        tmp[i] = psi[i] + k3[i] * MINUS_I * h;
    }
    g.apply(t + h, tmp, k4, scratch);
    for i in 0..psi.len() {
        psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * MINUS_I * (h / 6.0);
    }
}

/// Propagates `psi0` (lab frame, at `t = 0`) under `g`.
pub fn propagate(
    g: &Generator,
    space: Option<&HilbertSpace>,
    psi0: &StateVector,
    cfg: &PropagationConfig,
    channels: &[Channel],
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let dim = g.dim();
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: psi0.dim() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(invalid("psi0", format!("not normalized (norm {})", psi0.norm())));
    }
    let set = ChannelSet::new(space, dim, channels)?;
    match cfg.integrator {
        Integrator::Rk4Fixed => propagate_rk4(g, psi0, cfg, &set),
        Integrator::RkAdaptive => propagate_dopri(g, psi0, cfg, &set),
    }
}

fn sample(rec: &mut TrajectoryRecord, set: &ChannelSet, g: &Generator, t: f64, psi: &[C64], dt: f64) -> Result<()> {
    let lab = if set.needs_lab { Some(g.to_lab(t, psi)) } else { None };
    rec.record(set, t, psi, lab.as_deref());
    let drift = (1.0 - norm(psi)).abs();
    if drift > NORM_ABORT || !drift.is_finite() {
        return Err(Error::NormDrift { drift, time: t, limit: NORM_ABORT, dt });
    }
    Ok(())
}

fn propagate_rk4(g: &Generator, psi0: &StateVector, cfg: &PropagationConfig, set: &ChannelSet) -> Result<TrajectoryRecord> {
    let dt_target = cfg.dt.unwrap_or_else(|| g.default_dt());
    let steps = (cfg.t_final / dt_target).ceil().max(if cfg.t_final > 0.0 { 1.0 } else { 0.0 }) as u64;
    let h = if steps == 0 { 0.0 } else { cfg.t_final / steps as f64 };
    let mut psi = g.from_lab(0.0, &psi0.0);
    let mut rec = TrajectoryRecord::new(set.names.clone());
    let mut w = Rk4Work::new(g.dim());
    sample(&mut rec, set, g, 0.0, &psi, h)?;
    for s in 0..steps {
        let t = s as f64 * h;
        rk4_step(g, t, h, &mut psi, &mut w);
        if (s + 1) % cfg.sample_stride as u64 == 0 || s + 1 == steps {
            sample(&mut rec, set, g, (s + 1) as f64 * h, &psi, h)?;
        }
    }
    rec.final_state = StateVector(g.to_lab(cfg.t_final, &psi));
    Ok(rec)
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the max-norm error estimate.
fn dopri_step(g: &Generator, t: f64, h: f64, psi: &[C64], out: &mut [C64], k: &mut [Vec<C64>], scratch: &mut [C64]) -> f64 {
    let n = psi.len();
    let mut tmp = vec![c64(0.0, 0.0); n];
    for s in 0..7 {
        for i in 0..n {
            let mut acc = psi[i];
            for j in 0..s {
                if DP_A[s][j] != 0.0 {
                    acc += k[j][i] * (h * DP_A[s][j]);
                }
            }
            tmp[i] = acc;
        }
        g.apply(t + DP_C[s] * h, &tmp, &mut k[s], scratch);
        for z in k[s].iter_mut() {
            *z *= MINUS_I;
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..n {
        let mut y5 = psi[i];
        let mut e = c64(0.0, 0.0);
        for s in 0..7 {
            y5 += k[s][i] * (h * DP_B5[s]);
            e += k[s][i] * (h * (DP_B5[s] - DP_B4[s]));
        }
        out[i] = y5;
        err = err.max(e.norm());
    }
    err
}

fn propagate_dopri(g: &Generator, psi0: &StateVector, cfg: &PropagationConfig, set: &ChannelSet) -> Result<TrajectoryRecord> {
    let out_dt = cfg.dt.expect("validated") * cfg.sample_stride as f64;
    let n_out = (cfg.t_final / out_dt).ceil() as u64;
    let dim = g.dim();
    let mut psi = g.from_lab(0.0, &psi0.0);
    let mut next = vec![c64(0.0, 0.0); dim];
    let mut k = vec![vec![c64(0.0, 0.0); dim]; 7];
    let mut scratch = vec![c64(0.0, 0.0); dim];
    let mut rec = TrajectoryRecord::new(set.names.clone());
    let mut h = g.default_dt();
    let mut t = 0.0;
    sample(&mut rec, set, g, t, &psi, h)?;
    for m in 1..=n_out {
        let target = (m as f64 * out_dt).min(cfg.t_final);
        while t < target {
            let clipped = target - t <= h;
            let step = if clipped { target - t } else { h };
            let err = dopri_step(g, t, step, &psi, &mut next, &mut k, &mut scratch);
            let ratio = err / cfg.tolerance;
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if ratio <= 1.0 {
                t = if clipped { target } else { t + step };
                psi.copy_from_slice(&next);
                // A step shortened to land on the output grid says nothing about h.
                if !clipped {
                    h = step * factor;
                }
            } else {
                h = step * factor;
            }
            if h < 1e-14 * cfg.t_final.max(1.0) {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
        }
        sample(&mut rec, set, g, t, &psi, h)?;
    }
    rec.final_state = StateVector(g.to_lab(t, &psi));
    Ok(rec)
}

/// Exact evolution `ψ(t) = V e^{−iEt} V† ψ₀` under a static Hamiltonian.
#[derive(Clone, Debug)]
pub struct ExactEvolution {
    eig: EigenDecomposition,
}

impl ExactEvolution {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        Ok(Self { eig: eig_hermitian(h)? })
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    /// Eigenbasis amplitudes `V†ψ`.
    fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        let n = self.eig.dim();
        let v = &self.eig.vectors;
        (0..n).map(|k| (0..n).map(|i| v[(i, k)].conj() * psi[i]).sum()).collect()
    }

    fn assemble(&self, coeffs: &[C64], t: f64) -> Vec<C64> {
        let n = self.eig.dim();
        let v = &self.eig.vectors;
        let phased: Vec<C64> = coeffs.iter().zip(&self.eig.values).map(|(c, e)| c * C64::cis(-e * t)).collect();
        (0..n).map(|i| (0..n).map(|k| v[(i, k)] * phased[k]).sum()).collect()
    }

    pub fn state_at(&self, psi0: &StateVector, t: f64) -> StateVector {
        StateVector(self.assemble(&self.coefficients(&psi0.0), t))
    }

    /// Samples the channels at each of `times`.
    pub fn trajectory(
        &self,
        space: Option<&HilbertSpace>,
        psi0: &StateVector,
        times: &[f64],
        channels: &[Channel],
    ) -> Result<TrajectoryRecord> {
        let dim = self.eig.dim();
        if psi0.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: psi0.dim() });
        }
        let set = ChannelSet::new(space, dim, channels)?;
        let coeffs = self.coefficients(&psi0.0);
        let mut rec = TrajectoryRecord::new(set.names.clone());
        let mut last = psi0.0.clone();
        for &t in times {
            last = self.assemble(&coeffs, t);
            rec.record(&set, t, &last, Some(&last));
        }
        rec.final_state = StateVector(last);
        Ok(rec)
    }
}

/// `n + 1` evenly spaced times on `[0, t_final]`.
pub fn uniform_times(t_final: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_final * k as f64 / n as f64).collect()
}

/// One-period propagator of a periodic generator, built column by column with
/// fixed-step RK4.
#[derive(Clone, Debug)]
pub struct FloquetMap {
    pub period: f64,
    pub steps_per_period: usize,
    pub matrix: ComplexMatrix,
}

impl FloquetMap {
    pub fn build(g: &Generator, period: f64, dt: Option<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid("period", format!("{period}")));
        }
        let dt = dt.unwrap_or_else(|| g.default_dt());
        let steps = (period / dt).ceil().max(1.0) as usize;
        let h = period / steps as f64;
        let dim = g.dim();
        let mut w = Rk4Work::new(dim);
        let mut m = ComplexMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut col = vec![c64(0.0, 0.0); dim];
            col[j] = c64(1.0, 0.0);
            for s in 0..steps {
                rk4_step(g, s as f64 * h, h, &mut col, &mut w);
            }
            m.set_column(j, &col);
        }
        Ok(Self { period, steps_per_period: steps, matrix: m })
    }

    /// `max |U†U − 1|`
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.rows();
        self.matrix.adjoint().matmul(&self.matrix).max_abs_diff(&ComplexMatrix::identity(n))
    }

    /// Eigen-decomposition of the map as `U = V e^{−iεT} V†`, with the
    /// quasienergies `ε ∈ (−π/T, π/T]` ascending in `values`.
    pub fn quasienergies(&self) -> Result<EigenDecomposition> {
        let m = &self.matrix;
        let n = m.rows();
        // (U − U†)/2i shares its eigenvectors with U and is exactly Hermitian.
        let k = ComplexMatrix::from_fn(n, n, |i, j| (m[(i, j)] - m[(j, i)].conj()) * c64(0.0, -0.5));
        let eig = eig_hermitian(&k)?;
        let mut pairs: Vec<(f64, Vec<C64>)> = Vec::with_capacity(n);
        for idx in 0..n {
            let v = eig.vector(idx);
            let mv = m.mul_vec(&v);
            let z: C64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
            let residual = mv.iter().zip(&v).map(|(a, b)| (a - z * b).norm_sqr()).sum::<f64>().sqrt();
            if residual > 1e-8 {
                return Err(Error::NoConvergence { iterations: idx });
            }
            pairs.push((-z.arg() / self.period, v));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut vectors = ComplexMatrix::zeros(n, n);
        for (j, (_, v)) in pairs.iter().enumerate() {
            vectors.set_column(j, v);
        }
        Ok(EigenDecomposition { values: pairs.into_iter().map(|p| p.0).collect(), vectors })
    }

    /// Hermitian `H_F` with `U = exp(−i H_F T)` and spectrum in `(−π/T, π/T]`.
    pub fn effective_hamiltonian(&self) -> Result<ComplexMatrix> {
        let q = self.quasienergies()?;
        let h = q.reconstruct();
        Ok(ComplexMatrix::from_fn(h.rows(), h.cols(), |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5))
    }

    /// `U^k` by repeated squaring.
    pub fn power(&self, mut k: u64) -> ComplexMatrix {
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

/// Settings for sampling a periodic generator once every few periods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StroboscopicConfig {
    pub t_final: f64,
    /// Target number of samples; the stride is rounded to whole periods.
    pub samples: usize,
    /// RK4 step inside the period (default `2π/ω_max/40`).
    pub dt: Option<f64>,
}

/// Evolves `psi0` over `[0, t_final]`, sampled at whole multiples of the
/// frame period.
pub fn propagate_stroboscopic(
    g: &Generator,
    space: Option<&HilbertSpace>,
    psi0: &StateVector,
    cfg: &StroboscopicConfig,
    channels: &[Channel],
) -> Result<(TrajectoryRecord, FloquetMap)> {
    let period = g
        .frame()
        .and_then(|f| f.period)
        .ok_or_else(|| invalid("frame", "stroboscopic runs need a periodic frame".to_string()))?;
    let map = FloquetMap::build(g, period, cfg.dt)?;
    let rec = stroboscopic_with(&map, g, space, psi0, cfg, channels)?;
    Ok((rec, map))
}

/// Stroboscopic run reusing a prebuilt one-period map.
pub fn stroboscopic_with(
    map: &FloquetMap,
    g: &Generator,
    space: Option<&HilbertSpace>,
    psi0: &StateVector,
    cfg: &StroboscopicConfig,
    channels: &[Channel],
) -> Result<TrajectoryRecord> {
    let dim = g.dim();
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: psi0.dim() });
    }
    let set = ChannelSet::new(space, dim, channels)?;
    let periods = (cfg.t_final / map.period).ceil().max(1.0) as u64;
    let stride = (periods / cfg.samples.max(1) as u64).max(1);
    let step = map.power(stride);
    let mut psi = g.from_lab(0.0, &psi0.0);
    let mut rec = TrajectoryRecord::new(set.names.clone());
    let dt = map.period / map.steps_per_period as f64;
    sample(&mut rec, &set, g, 0.0, &psi, dt)?;
    let mut k = 0u64;
    while k < periods {
        psi = step.mul_vec(&psi);
        k += stride;
        sample(&mut rec, &set, g, k as f64 * map.period, &psi, dt)?;
    }
    rec.final_state = StateVector(g.to_lab(k as f64 * map.period, &psi));
    Ok(rec)
}

/// Avoided crossing of the quasienergies carrying `u`, `v`, for a family of
/// periodic generators `build(value)` (operator and periodic frame).
pub fn locate_floquet_crossing(
    build: impl Fn(f64) -> Result<(TimeDependentOperator, RotatingFrame)>,
    u: &StateVector,
    v: &StateVector,
    bracket: (f64, f64),
) -> Result<spectral::CrossingReport> {
    locate_crossing_with(
        |w| {
            let (op, frame) = build(w)?;
            let period = frame
                .period
                .ok_or_else(|| invalid("frame", "quasienergies need a periodic frame".to_string()))?;
            let g = Generator::framed(&op, &frame)?;
            FloquetMap::build(&g, period, None)?.effective_hamiltonian()
        },
        u,
        v,
        bracket,
    )
}

/// Period average of the framed generator, by uniform sampling with enough
/// points to integrate every harmonic present exactly.
pub fn period_average(op: &TimeDependentOperator, frame: &RotatingFrame) -> Result<ComplexMatrix> {
    let period = frame
        .period
        .ok_or_else(|| invalid("frame", "averaging needs a periodic frame".to_string()))?;
    let w = op.framed_max_frequency(frame);
    let harmonics = (w * period / (2.0 * PI)).ceil() as usize;
    let n = 2 * harmonics + 8;
    let mut acc = ComplexMatrix::zeros(op.dim(), op.dim());
    for k in 0..n {
        acc += &op.evaluate_framed(period * k as f64 / n as f64, frame);
    }
    let avg = acc.scale_real(1.0 / n as f64);
    // Hermitian up to rounding; restore exact symmetry.
    Ok(ComplexMatrix::from_fn(avg.rows(), avg.cols(), |i, j| (avg[(i, j)] + avg[(j, i)].conj()) * 0.5))
}

/// `max |H_F(t) − H_F(t + T)|` over a few sample times.
pub fn periodicity_defect(op: &TimeDependentOperator, frame: &RotatingFrame) -> Result<f64> {
    let period = frame
        .period
        .ok_or_else(|| invalid("frame", "no period".to_string()))?;
    let mut d: f64 = 0.0;
    for &t in &[0.0, 0.123_456 * period, 0.77 * period] {
        d = d.max(op.evaluate_framed(t, frame).max_abs_diff(&op.evaluate_framed(t + period, frame)));
    }
    Ok(d)
}

pub fn default_two_level_channels() -> Vec<Channel> {
    vec![Channel::Basis(E0), Channel::Basis(G3)]
}

/// Time of the first local maximum of `P(g,3)` under a static Hamiltonian,
/// located on a grid and refined by golden section.
pub fn first_maximum(evo: &ExactEvolution, space: &HilbertSpace, psi0: &StateVector, horizon: f64) -> Result<(f64, f64)> {
    let g3 = space.index(G3)?;
    let coeffs = evo.coefficients(&psi0.0);
    let p = |t: f64| evo.assemble(&coeffs, t)[g3].norm_sqr();
    let n = 4000;
    let dt = horizon / n as f64;
    let mut prev = p(0.0);
    let mut k_best = None;
    let mut rising = false;
    for k in 1..=n {
        let cur = p(k as f64 * dt);
        if cur > prev + 1e-12 {
            rising = true;
        } else if rising && cur < prev - 1e-12 {
            k_best = Some(k - 1);
            break;
        }
        prev = cur;
    }
    let k = k_best.ok_or_else(|| invalid("horizon", format!("no maximum of P(g,3) before t = {horizon}")))?;
    let lo = (k as f64 - 1.0) * dt;
    let hi = (k as f64 + 1.0) * dt;
    let (t, neg) = golden_section_min(|t| Ok(-p(t)), lo, hi, 1e-12)?;
    Ok((t, -neg))
}

/// How the fidelity snapshot time is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnapshotConvention {
    /// First maximum of `P(g,3)` at `x = 0.5`, reused for every `x`.
    FirstMaximum,
    /// `π/(2Ω_eff)` at `x = 0.5`.
    HalfRabiPeriod,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityRow {
    pub x: f64,
    /// Resonance used and `P(g,3)` at the snapshot, or the failure.
    pub outcome: core::result::Result<(f64, f64), Error>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelitySweep {
    pub snapshot_time: f64,
    pub rows: Vec<FidelityRow>,
}

impl FidelitySweep {
    /// `(x, fidelity)` of the best successful row.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|&(_, f)| (r.x, f)))
            .fold(None, |b: Option<(f64, f64)>, (x, f)| match b {
                Some((_, bf)) if bf >= f => b,
                _ => Some((x, f)),
            })
    }
}

/// Resonant anisotropic Rabi model at `x`, with the crossing re-solved.
fn resonant_effective(space: &HilbertSpace, lambda: f64, x: f64) -> Result<EffectiveParams> {
    let template = EffectiveParams::new(1.0, 1.0 / 3.0, lambda, x)?;
    let r = spectral::locate_crossing(&template, space, None)?;
    template.with_omega_c(r.omega_c_star)
}

/// `P(g,3)` at a common snapshot time under the effective model, sweeping
/// `x` with the resonance re-located for each value.
pub fn fidelity_vs_x(
    x_values: &[f64],
    lambda: f64,
    space: &HilbertSpace,
    snapshot: SnapshotConvention,
) -> Result<FidelitySweep> {
    let psi0 = space.basis_state(E0)?;
    let reference = resonant_effective(space, lambda, 0.5)?;
    let snapshot_time = match snapshot {
        SnapshotConvention::Fixed(t) => t,
        SnapshotConvention::HalfRabiPeriod => PI / (2.0 * analytics::rabi_frequency_eff(&reference)?),
        SnapshotConvention::FirstMaximum => {
            let evo = ExactEvolution::new(&anisotropic_rabi(space, &reference)?)?;
            let horizon = 2.0 * PI / analytics::rabi_frequency_eff(&reference)?;
            first_maximum(&evo, space, &psi0, horizon)?.0
        }
    };
    let g3 = space.index(G3)?;
    let rows = x_values
        .iter()
        .map(|&x| {
            let outcome = (|| {
                let e = resonant_effective(space, lambda, x)?;
                let evo = ExactEvolution::new(&anisotropic_rabi(space, &e)?)?;
                Ok((e.omega_c, evo.state_at(&psi0, snapshot_time).0[g3].norm_sqr()))
            })();
            FidelityRow { x, outcome }
        })
        .collect();
    Ok(FidelitySweep { snapshot_time, rows })
}

/// Parameters of the three-level comparison runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeakageSetup {
    pub lambda: f64,
    pub x: f64,
    /// Lab transition frequency of the modulated run, in units of the
    /// effective `ω₀`.
    pub omega0_lab: f64,
    /// `δ_b/δ` for the modulated run.
    pub delta_b_over_delta: f64,
    /// `δ_b/δ′` for the unmodulated run.
    pub delta_b_over_delta_prime: f64,
    pub fock_cutoff: usize,
    pub samples: usize,
}

impl Default for LeakageSetup {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            x: 0.5,
            omega0_lab: 100.0,
            delta_b_over_delta: 50.0,
            delta_b_over_delta_prime: 1.0,
            fock_cutoff: crate::hilbert::DEFAULT_FOCK_CUTOFF,
            samples: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageRun {
    pub modulated: bool,
    pub params: ThreeLevelParams,
    pub record: TrajectoryRecord,
    /// `max_t P(g,3)` of the two-level model at the same operating point.
    pub two_level_max: f64,
}

impl LeakageRun {
    pub fn max_g3(&self) -> f64 {
        self.record.max_of(&Channel::Basis(G3).name()).map_or(0.0, |m| m.0)
    }

    pub fn max_f(&self) -> f64 {
        self.record.max_of(&Channel::AtomTotal(AtomLevel::F).name()).map_or(0.0, |m| m.0)
    }
}

fn leakage_channels() -> Vec<Channel> {
    vec![Channel::Basis(E0), Channel::Basis(G3), Channel::AtomTotal(AtomLevel::F)]
}

/// Three-level run from `|e,0⟩`: modulated (lab model in its co-moving frame,
/// resonance re-located on its quasienergies) or unmodulated
/// (static model at the two-level Rabi-model resonance).
pub fn three_level_leakage(modulated: bool, setup: &LeakageSetup) -> Result<LeakageRun> {
    let space3 = HilbertSpace::three_level(setup.fock_cutoff)?;
    let space2 = HilbertSpace::two_level(setup.fock_cutoff)?;
    let psi3 = space3.basis_state(E0)?;
    let channels = leakage_channels();
    if modulated {
        let eff = resonant_effective(&space2, setup.lambda, setup.x)?;
        let lab = from_effective(1.0, eff.omega_c, setup.x, setup.omega0_lab, setup.lambda)?;
        let m = lab.modulation.expect("from_effective is modulated");
        let delta_b = setup.delta_b_over_delta * eff.delta;
        let build = |omega_c: f64| ThreeLevelParams::new(lab.omega0, delta_b, omega_c, lab.lambda, Some(m));
        let frame = RotatingFrame::co_moving(&space3, Some(m), lab.omega0)?;
        let u = space3.basis_state(E0)?;
        let v = space3.basis_state(G3)?;
        let centre = lab.omega_c;
        let crossing = locate_floquet_crossing(
            |omega_c| Ok((three_level_lab(&space3, &build(omega_c)?)?, frame.clone())),
            &u,
            &v,
            (centre - 0.01, centre + 0.01),
        )?;
        let params = build(crossing.omega_c_star)?;
        let op = three_level_lab(&space3, &params)?;
        let g = Generator::framed(&op, &frame)?;
        let t_final = 2.0 * PI / crossing.splitting;
        let cfg = StroboscopicConfig { t_final, samples: setup.samples, dt: None };
        let (record, _) = propagate_stroboscopic(&g, Some(&space3), &psi3, &cfg, &channels)?;
        let two = ExactEvolution::new(&anisotropic_rabi(&space2, &eff)?)?;
        let two_rec = two.trajectory(
            Some(&space2),
            &space2.basis_state(E0)?,
            &uniform_times(t_final, setup.samples),
            &[Channel::Basis(G3)],
        )?;
        let two_level_max = two_rec.max_of(&Channel::Basis(G3).name()).map_or(0.0, |m| m.0);
        Ok(LeakageRun { modulated, params, record, two_level_max })
    } else {
        let (omega_c, splitting) = rabi_model_resonance(&space2, setup.lambda)?;
        let delta_prime = 1.0 - omega_c;
        let params = ThreeLevelParams::new(1.0, setup.delta_b_over_delta_prime * delta_prime, omega_c, setup.lambda, None)?;
        let h3 = three_level_lab(&space3, &params)?;
        let evo = ExactEvolution::new(h3.static_part())?;
        let t_final = 2.0 * PI / splitting;
        let times = uniform_times(t_final, setup.samples);
        let record = evo.trajectory(Some(&space3), &psi3, &times, &channels)?;
        let lab2 = LabFrameParams::unmodulated(1.0, omega_c, setup.lambda)?;
        let two = ExactEvolution::new(&static_rabi(&space2, &lab2)?)?;
        let two_rec = two.trajectory(Some(&space2), &space2.basis_state(E0)?, &times, &[Channel::Basis(G3)])?;
        let two_level_max = two_rec.max_of(&Channel::Basis(G3).name()).map_or(0.0, |m| m.0);
        Ok(LeakageRun { modulated, params, record, two_level_max })
    }
}

/// Three-photon resonance of the unmodulated Rabi model `(ω₀ = 1)`:
/// `(ω_c*, splitting)`.
pub fn rabi_model_resonance(space: &HilbertSpace, lambda: f64) -> Result<(f64, f64)> {
    let u = space.basis_state(E0)?;
    let v = space.basis_state(G3)?;
    let centre = 1.0 / 3.0 + 3.0 * lambda * lambda;
    let r = locate_crossing_with(
        |w| static_rabi(space, &LabFrameParams::unmodulated(1.0, w, lambda)?),
        &u,
        &v,
        (centre - 0.01, centre + 0.01),
    )?;
    Ok((r.omega_c_star, r.splitting))
}

/// Generator of the sideband-expanded model at an effective operating point,
/// in the frame removing the effective free Hamiltonian (period `2π/ω_f`).
pub fn rotating_frame_generator(
    space: &HilbertSpace,
    eff: &EffectiveParams,
    omega0_lab: f64,
    order: usize,
) -> Result<(TimeDependentOperator, RotatingFrame)> {
    let lab = from_effective(eff.omega0, eff.omega_c, eff.x, omega0_lab, eff.lambda)?;
    let op = rotating_frame(space, &lab, order)?;
    let frame = RotatingFrame::free_effective(space, eff, Some(2.0 * PI / lab.omega_f()))?;
    Ok((op, frame))
}

/// Three-photon resonance of the sideband-expanded model, located on its
/// quasienergy spectrum; `template.omega_c` is ignored.
pub fn rotating_frame_resonance(
    space: &HilbertSpace,
    template: &EffectiveParams,
    omega0_lab: f64,
    order: usize,
) -> Result<spectral::CrossingReport> {
    let u = space.basis_state(E0)?;
    let v = space.basis_state(G3)?;
    locate_floquet_crossing(
        |w| rotating_frame_generator(space, &template.with_omega_c(w)?, omega0_lab, order),
        &u,
        &v,
        spectral::default_bracket(template),
    )
}

/// Rotating-frame run of the sideband-expanded model at an effective
/// operating point, evolved stroboscopically in the frame that removes the
/// effective free Hamiltonian.
pub fn rotating_frame_run(
    space: &HilbertSpace,
    eff: &EffectiveParams,
    omega0_lab: f64,
    order: usize,
    t_final: f64,
    samples: usize,
) -> Result<TrajectoryRecord> {
    let (op, frame) = rotating_frame_generator(space, eff, omega0_lab, order)?;
    let g = Generator::framed(&op, &frame)?;
    let cfg = StroboscopicConfig { t_final, samples, dt: None };
    Ok(propagate_stroboscopic(&g, Some(space), &space.basis_state(E0)?, &cfg, &default_two_level_channels())?.0)
}

/// Largest channel difference between the lab model and its `U₁`-frame
/// sideband expansion, both integrated directly with RK4 from `|e,0⟩`.
pub fn frame_equivalence(
    space: &HilbertSpace,
    lab: &LabFrameParams,
    order: usize,
    t_final: f64,
    steps_per_fastest_period: f64,
) -> Result<f64> {
    let h1 = crate::hamiltonians::lab_full(space, lab)?;
    let h2 = rotating_frame(space, lab, order)?;
    let psi0 = space.basis_state(E0)?;
    let channels = default_two_level_channels();
    let g1 = Generator::lab(&h1);
    let g2 = Generator::lab(&h2);
    let w = g1.max_frequency().max(g2.max_frequency());
    let dt = 2.0 * PI / w / steps_per_fastest_period;
    let steps = (t_final / dt).ceil() as usize;
    let stride = (steps / 200).max(1);
    let cfg = PropagationConfig::rk4(t_final, stride).with_dt(dt);
    let r1 = propagate(&g1, Some(space), &psi0, &cfg, &channels)?;
    let r2 = propagate(&g2, Some(space), &psi0, &cfg, &channels)?;
    let mut d: f64 = 0.0;
    for (a, b) in r1.probabilities.iter().zip(&r2.probabilities) {
        for (x, y) in a.iter().zip(b) {
            d = d.max((x - y).abs());
        }
    }
    Ok(d)
}

/// Builds `Modulation` from `(A, ω_f)`.
pub fn modulation(amplitude: f64, omega_f: f64) -> Modulation {
    Modulation { amplitude, omega_f }
}
