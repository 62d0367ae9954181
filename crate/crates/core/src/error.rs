use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |M - M^dagger| = {defect:e} exceeds {tolerance:e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),

    #[error("invalid basis label: {0}")]
    InvalidLabel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument {x} outside the validated Bessel range |x| <= {limit}")]
    BesselRange { x: f64, limit: f64 },

    #[error("no interior gap minimum in [{lo}, {hi}]")]
    NoInteriorMinimum { lo: f64, hi: f64 },

    #[error("norm drift {drift:e} at t = {time} exceeds {limit:e}; reduce the step (dt = {dt:e})")]
    NormDrift { drift: f64, time: f64, limit: f64, dt: f64 },

    #[error("density matrix lost positivity: min eigenvalue {min_eigenvalue:e} at t = {time}; reduce the step (dt = {dt:e})")]
    Positivity { min_eigenvalue: f64, time: f64, dt: f64 },

    #[error("operator mixes conserved sectors: {0}")]
    SectorMixing(String),

    #[error("operator is not periodic with period {period}: {reason}")]
    NotPeriodic { period: f64, reason: String },

    #[error("adaptive integrator step underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("kinetic form is not positive definite (C_KPO C_an - C_int^2 = {determinant:e})")]
    KineticForm { determinant: f64 },
}
