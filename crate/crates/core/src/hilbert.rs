//! Truncated atom ⊗ Fock spaces and their elementary operators.
//!
//! Basis ordering is fixed throughout the crate: the atom level is the slow
//! index and the photon number the fast one, so `index = atom * (N_max + 1) + n`.

use core::fmt;

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;

use crate::linalg::{c64, ComplexMatrix, StateVector};
use crate::{Error, Result};

/// Photon-number cutoff used for all reproductions.
pub const DEFAULT_FOCK_CUTOFF: usize = 15;
/// Cutoff used by the convergence guard reruns.
pub const CONVERGENCE_FOCK_CUTOFF: usize = 25;
/// Smallest admissible space dimension.
pub const MIN_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomLevel {
    G,
    E,
    F,
}

impl AtomLevel {
    pub fn index(self) -> usize {
        match self {
            AtomLevel::G => 0,
            AtomLevel::E => 1,
            AtomLevel::F => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(AtomLevel::G),
            1 => Some(AtomLevel::E),
            2 => Some(AtomLevel::F),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            AtomLevel::G => 'g',
            AtomLevel::E => 'e',
            AtomLevel::F => 'f',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'g' => Some(AtomLevel::G),
            'e' => Some(AtomLevel::E),
            'f' => Some(AtomLevel::F),
            _ => None,
        }
    }
}

/// A bare product state `|atom, n⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub atom: AtomLevel,
    pub photons: usize,
}

impl BasisLabel {
    pub const fn new(atom: AtomLevel, photons: usize) -> Self {
        Self { atom, photons }
    }

    /// Parses `"e,0"`, `"g3"` or `"|g,3>"`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('|').trim_end_matches('>').trim_end_matches('⟩');
        let mut chars = t.chars();
        let atom = chars
            .next()
            .and_then(AtomLevel::from_symbol)
            .ok_or_else(|| Error::InvalidLabel(format!("{s:?}: expected g, e or f first")))?;
        let rest = chars.as_str().trim_start_matches(',').trim();
        let photons = rest
            .parse::<usize>()
            .map_err(|_| Error::InvalidLabel(format!("{s:?}: bad photon number")))?;
        Ok(Self { atom, photons })
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.atom.symbol(), self.photons)
    }
}

/// Atomic operators tensored with the mode identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomOperator {
    SigmaZ,
    SigmaX,
    SigmaPlus,
    SigmaMinus,
    /// `|a⟩⟨b|`
    Proj(AtomLevel, AtomLevel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    atom_levels: usize,
    fock_cutoff: usize,
}

impl HilbertSpace {
    pub fn new(atom_levels: usize, fock_cutoff: usize) -> Result<Self> {
        if !(2..=3).contains(&atom_levels) {
            return Err(Error::InvalidSpace(format!("atom_levels must be 2 or 3, got {atom_levels}")));
        }
        let dim = atom_levels * (fock_cutoff + 1);
        if dim < MIN_DIM {
            return Err(Error::InvalidSpace(format!(
                "dimension {dim} below the minimum {MIN_DIM} (fock_cutoff {fock_cutoff})"
            )));
        }
        Ok(Self { atom_levels, fock_cutoff })
    }

    pub fn two_level(fock_cutoff: usize) -> Result<Self> {
        Self::new(2, fock_cutoff)
    }

    pub fn three_level(fock_cutoff: usize) -> Result<Self> {
        Self::new(3, fock_cutoff)
    }

    pub fn atom_levels(&self) -> usize {
        self.atom_levels
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.atom_levels * self.fock_dim()
    }

    /// Same atom, different cutoff.
    pub fn with_cutoff(&self, fock_cutoff: usize) -> Result<Self> {
        Self::new(self.atom_levels, fock_cutoff)
    }

    pub fn check_label(&self, label: BasisLabel) -> Result<()> {
        if label.atom.index() >= self.atom_levels {
            return Err(Error::InvalidLabel(format!(
                "|{label}⟩ needs a {}-level atom, space has {}",
                label.atom.index() + 1,
                self.atom_levels
            )));
        }
        if label.photons > self.fock_cutoff {
            return Err(Error::InvalidLabel(format!(
                "|{label}⟩ exceeds fock cutoff {}",
                self.fock_cutoff
            )));
        }
        Ok(())
    }

    pub fn index(&self, label: BasisLabel) -> Result<usize> {
        self.check_label(label)?;
        Ok(label.atom.index() * self.fock_dim() + label.photons)
    }

    pub fn label(&self, index: usize) -> Result<BasisLabel> {
        if index >= self.dim() {
            return Err(Error::InvalidLabel(format!("index {index} out of range {}", self.dim())));
        }
        let atom = AtomLevel::from_index(index / self.fock_dim()).expect("atom index in range");
        Ok(BasisLabel { atom, photons: index % self.fock_dim() })
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        (0..self.dim()).map(|i| self.label(i).expect("in range")).collect()
    }

    /// `(-1)^(n + atom index)`, conserved by every Hamiltonian built here
    /// except where the atom and mode exchange an odd number of quanta.
    pub fn parity(&self, index: usize) -> usize {
        let label = self.label(index).expect("index in range");
        (label.photons + label.atom.index()) % 2
    }

    pub fn identity(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.dim())
    }

    fn mode_annihilation(&self) -> ComplexMatrix {
        let d = self.fock_dim();
        ComplexMatrix::from_fn(d, d, |i, j| {
            if j == i + 1 {
                c64((j as f64).sqrt(), 0.0)
            } else {
                c64(0.0, 0.0)
            }
        })
    }

    fn lift_mode(&self, m: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::identity(self.atom_levels).kron(m)
    }

    fn lift_atom(&self, m: &ComplexMatrix) -> ComplexMatrix {
        m.kron(&ComplexMatrix::identity(self.fock_dim()))
    }

    /// `a ⊗`-identity with `a|n⟩ = √n |n−1⟩`.
    pub fn annihilation(&self) -> ComplexMatrix {
        self.lift_mode(&self.mode_annihilation())
    }

    pub fn creation(&self) -> ComplexMatrix {
        self.annihilation().adjoint()
    }

    pub fn number(&self) -> ComplexMatrix {
        let d = self.fock_dim();
        let n: Vec<f64> = (0..d).map(|k| k as f64).collect();
        self.lift_mode(&ComplexMatrix::from_diag(&n))
    }

    /// `a + a†`
    pub fn quadrature(&self) -> ComplexMatrix {
        let a = self.annihilation();
        &a + &a.adjoint()
    }

    pub fn atom_operator(&self, kind: AtomOperator) -> Result<ComplexMatrix> {
        let l = self.atom_levels;
        let pauli_guard = || {
            if l != 2 {
                Err(Error::InvalidSpace(format!("{kind:?} requires a 2-level atom, space has {l}")))
            } else {
                Ok(())
            }
        };
        let local = match kind {
            AtomOperator::SigmaZ => {
                pauli_guard()?;
                ComplexMatrix::from_diag(&[-1.0, 1.0])
            }
            AtomOperator::SigmaX => {
                pauli_guard()?;
                let mut m = ComplexMatrix::zeros(2, 2);
                m[(0, 1)] = c64(1.0, 0.0);
                m[(1, 0)] = c64(1.0, 0.0);
                m
            }
            AtomOperator::SigmaPlus => {
                pauli_guard()?;
                self.local_transition(AtomLevel::E, AtomLevel::G)?
            }
            AtomOperator::SigmaMinus => {
                pauli_guard()?;
                self.local_transition(AtomLevel::G, AtomLevel::E)?
            }
            AtomOperator::Proj(a, b) => self.local_transition(a, b)?,
        };
        Ok(self.lift_atom(&local))
    }

    /// `|a⟩⟨b| ⊗ I`
    pub fn transition(&self, a: AtomLevel, b: AtomLevel) -> Result<ComplexMatrix> {
        self.atom_operator(AtomOperator::Proj(a, b))
    }

    fn local_transition(&self, a: AtomLevel, b: AtomLevel) -> Result<ComplexMatrix> {
        let l = self.atom_levels;
        for level in [a, b] {
            if level.index() >= l {
                return Err(Error::InvalidSpace(format!(
                    "level {} does not exist in a {l}-level atom",
                    level.symbol()
                )));
            }
        }
        let mut m = ComplexMatrix::zeros(l, l);
        m[(a.index(), b.index())] = c64(1.0, 0.0);
        Ok(m)
    }

    pub fn basis_state(&self, label: BasisLabel) -> Result<StateVector> {
        Ok(StateVector::basis(self.dim(), self.index(label)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AtomLevel::*;

    #[test]
    fn ladder_elements() {
        let s = HilbertSpace::two_level(5).unwrap();
        let a = s.annihilation();
        let i = |l: AtomLevel, n| s.index(BasisLabel::new(l, n)).unwrap();
        assert_eq!(a[(i(G, 0), i(G, 1))], c64(1.0, 0.0));
        assert!((a[(i(E, 2), i(E, 3))].re - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sigma_z_and_identities() {
        let s = HilbertSpace::two_level(4).unwrap();
        let sz = s.atom_operator(AtomOperator::SigmaZ).unwrap();
        let g0 = s.basis_state(BasisLabel::new(G, 0)).unwrap();
        let out = sz.mul_vec(g0.as_slice());
        assert_eq!(out[0], c64(-1.0, 0.0));

        let sp = s.atom_operator(AtomOperator::SigmaPlus).unwrap();
        let sm = s.atom_operator(AtomOperator::SigmaMinus).unwrap();
        let ee = s.transition(E, E).unwrap();
        assert_eq!(sp.matmul(&sm), ee);

        let sx = s.atom_operator(AtomOperator::SigmaX).unwrap();
        assert_eq!(sx.matmul(&sx), s.identity());
    }

    #[test]
    fn rejects_wrong_level_requests() {
        let s2 = HilbertSpace::two_level(4).unwrap();
        assert!(s2.transition(F, E).is_err());
        assert!(s2.basis_state(BasisLabel::new(F, 0)).is_err());
        assert!(s2.basis_state(BasisLabel::new(G, 5)).is_err());
        let s3 = HilbertSpace::three_level(4).unwrap();
        assert!(s3.atom_operator(AtomOperator::SigmaZ).is_err());
        assert!(s3.transition(F, E).is_ok());
        assert!(HilbertSpace::two_level(2).is_err());
        assert!(HilbertSpace::new(4, 10).is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!(BasisLabel::parse("e,0").unwrap(), BasisLabel::new(E, 0));
        assert_eq!(BasisLabel::parse("|g,3>").unwrap(), BasisLabel::new(G, 3));
        assert_eq!(BasisLabel::parse("f12").unwrap(), BasisLabel::new(F, 12));
        assert!(BasisLabel::parse("x,1").is_err());
        assert!(BasisLabel::parse("g,").is_err());
    }
}
