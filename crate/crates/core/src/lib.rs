//! Numerical core for the frequency-modulated quantum Rabi model.
//!
//! Everything here is allocation-only (`no_std` + `alloc`): dense complex linear
//! algebra, truncated atom ⊗ Fock spaces, the model Hamiltonians, spectral
//! scans, closed and open system propagation, closed-form effective-model
//! results and the Josephson-circuit parameter map. File formats, the CLI and
//! experiment orchestration live in the `fmqrm` crate.

#![no_std]

extern crate alloc;

pub mod analytics;
pub mod circuit;
pub mod dynamics;
mod error;
pub mod frames;
pub mod hamiltonians;
pub mod hilbert;
pub mod linalg;
pub mod open_system;
pub mod presets;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, StateVector, C64};
