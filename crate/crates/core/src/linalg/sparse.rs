//! Compressed-row sparse complex matrices, used for operator application in
//! the time steppers where most matrix entries vanish.

use alloc::vec;
use alloc::vec::Vec;

use super::{ComplexMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Keeps entries with `|m_ij| > threshold`.
    pub fn from_dense(m: &ComplexMatrix, threshold: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.rows() {
            for (j, &z) in m.row(i).iter().enumerate() {
                if z.norm() > threshold {
                    col_idx.push(j);
                    values.push(z);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows: m.rows(), cols: m.cols(), row_ptr, col_idx, values }
    }

    /// Drops entries below `rel_threshold * max|m|`.
    pub fn from_dense_relative(m: &ComplexMatrix, rel_threshold: f64) -> Self {
        Self::from_dense(m, rel_threshold * m.max_abs())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over `(row, col, value)` of the stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows, self.cols);
        for (i, j, z) in self.entries() {
            m[(i, j)] = z;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_dense(&self.to_dense().adjoint(), 0.0)
    }

    /// `y += alpha * A x`
    pub fn mul_vec_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        self.mul_vec_add(C64::new(1.0, 0.0), x, &mut y);
        y
    }

    /// `out += alpha * A B` for dense `B`.
    pub fn mul_dense_add(&self, alpha: C64, b: &ComplexMatrix, out: &mut ComplexMatrix) {
        debug_assert_eq!(b.rows(), self.cols);
        let n = b.cols();
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = alpha * self.values[k];
                let brow = b.row(self.col_idx[k]);
                let orow = &mut out.as_mut_slice()[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
    }

    /// `out += alpha * B A` for dense `B`.
    pub fn dense_mul_add(&self, alpha: C64, b: &ComplexMatrix, out: &mut ComplexMatrix) {
        debug_assert_eq!(b.cols(), self.rows);
        let n = self.cols;
        for r in 0..b.rows() {
            let brow = b.row(r);
            for (i, &bv) in brow.iter().enumerate() {
                if bv == C64::new(0.0, 0.0) {
                    continue;
                }
                let s = alpha * bv;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    out.as_mut_slice()[r * n + self.col_idx[k]] += s * self.values[k];
                }
            }
        }
    }

    /// `out += alpha * B A^dagger` for dense `B`.
    pub fn dense_mul_adjoint_add(&self, alpha: C64, b: &ComplexMatrix, out: &mut ComplexMatrix) {
        // (B A^dagger)_{r i} = sum_j B_{r j} conj(A_{i j})
        debug_assert_eq!(b.cols(), self.cols);
        let n = self.rows;
        for r in 0..b.rows() {
            let brow = b.row(r);
            for i in 0..self.rows {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += brow[self.col_idx[k]] * self.values[k].conj();
                }
                out.as_mut_slice()[r * n + i] += alpha * acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn sample() -> ComplexMatrix {
        ComplexMatrix::from_fn(3, 3, |i, j| {
            if (i + j) % 2 == 0 { c64(i as f64 + 1.0, j as f64 - 1.0) } else { c64(0.0, 0.0) }
        })
    }

    #[test]
    fn dense_round_trip_and_products() {
        let a = sample();
        let s = SparseMatrix::from_dense(&a, 0.0);
        assert_eq!(s.nnz(), 5);
        assert_eq!(s.to_dense(), a);
        let b = ComplexMatrix::from_fn(3, 3, |i, j| c64((i * 3 + j) as f64, 0.5));
        let one = c64(1.0, 0.0);

        let mut out = ComplexMatrix::zeros(3, 3);
        s.mul_dense_add(one, &b, &mut out);
        assert!(out.max_abs_diff(&a.matmul(&b)) < 1e-14);

        let mut out = ComplexMatrix::zeros(3, 3);
        s.dense_mul_add(one, &b, &mut out);
        assert!(out.max_abs_diff(&b.matmul(&a)) < 1e-14);

        let mut out = ComplexMatrix::zeros(3, 3);
        s.dense_mul_adjoint_add(one, &b, &mut out);
        assert!(out.max_abs_diff(&b.matmul(&a.adjoint())) < 1e-14);

        let x = alloc::vec![c64(1.0, 2.0), c64(-1.0, 0.0), c64(0.0, 3.0)];
        let y = s.mul_vec(&x);
        let yd = a.mul_vec(&x);
        for (u, v) in y.iter().zip(&yd) {
            assert!((u - v).norm() < 1e-14);
        }
    }
}
