//! Hermitian eigensolver: Householder reduction to a real symmetric tridiagonal
//! matrix followed by implicit QL iterations with Wilkinson-type shifts.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is in the build graph
use num_traits::Float;


use super::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// stored as columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The `n`-th eigenvector (ascending order).
    pub fn vector(&self, n: usize) -> Vec<C64> {
        self.vectors.column(n)
    }

    /// `V f(E) V^dagger`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let weights: Vec<C64> = self.values.iter().map(|&e| f(e)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * weights[k] * v[(j, k)].conj()).sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|e| C64::new(e, 0.0))
    }
}

/// Diagonalises a Hermitian matrix.
///
/// Vectors carry a fixed phase: the largest-magnitude component of each is
/// real and positive (first such index on ties).
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    m.check_hermitian()?;
    let n = m.rows();
    if n == 0 {
        return Ok(EigenDecomposition { values: Vec::new(), vectors: ComplexMatrix::zeros(0, 0) });
    }
    // symmetrise away the sub-tolerance defect
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let (diag, offdiag, q) = tridiagonalize(&mut a);

    // diagonal unitary making the off-diagonal real and non-negative
    let mut phase = vec![C64::new(1.0, 0.0); n];
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let alpha = offdiag[k];
        let mag = alpha.norm();
        e[k] = mag;
        phase[k + 1] = if mag > 0.0 { phase[k] * (alpha / mag) } else { phase[k] };
    }
    let mut d = diag;
    let mut rot = tql2(&mut d, &mut e)?;

    // eigenpairs sorted ascending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(core::cmp::Ordering::Equal));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    rot = order.iter().map(|&i| core::mem::take(&mut rot[i])).collect();

    // vectors = Q * D * Z
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, z) in rot.iter().enumerate() {
        for row in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                if z[k] != 0.0 {
                    acc += q[(row, k)] * phase[k] * z[k];
                }
            }
            vectors[(row, col)] = acc;
        }
    }
    fix_phases(&mut vectors);
    Ok(EigenDecomposition { values, vectors })
}

/// Unitary Householder reduction `a = Q T Q^dagger`. Returns the real diagonal
/// of `T`, its complex subdiagonal and `Q`.
fn tridiagonalize(a: &mut ComplexMatrix) -> (Vec<f64>, Vec<C64>, ComplexMatrix) {
    let n = a.rows();
    let mut q = ComplexMatrix::identity(n);
    let mut offdiag = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];
    let zero = C64::new(0.0, 0.0);

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x: Vec<C64> = (0..len).map(|i| a[(k + 1 + i, k)]).collect();
        // the reflector is computed from the column scaled to unit max so that
        // tiny tails neither underflow nor blow up `tau`
        let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tail_max = x[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        if tail_max == 0.0 {
            offdiag[k] = x[0];
            continue;
        }
        let xs: Vec<C64> = x.iter().map(|z| z / scale).collect();
        let xnorm = xs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let ph = if xs[0].norm() > 0.0 { xs[0] / xs[0].norm() } else { C64::new(1.0, 0.0) };
        let alpha_s = -ph * xnorm;
        let alpha = alpha_s * scale;
        let mut v = xs;
        v[0] -= alpha_s;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;

        // p = tau * A22 v, w = p - (tau/2)(v^dagger p) v
        let mut p = vec![zero; len];
        for i in 0..len {
            let mut acc = zero;
            for j in 0..len {
                acc += a[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = acc * tau;
        }
        let vp: C64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let kcoef = vp.re * tau * 0.5;
        let w: Vec<C64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * kcoef).collect();
        for i in 0..len {
            for j in 0..len {
                a[(k + 1 + i, k + 1 + j)] -= v[i] * w[j].conj() + w[i] * v[j].conj();
            }
        }
        for i in 0..len {
            a[(k + 1 + i, k)] = zero;
            a[(k, k + 1 + i)] = zero;
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        offdiag[k] = alpha;

        // Q <- Q (I - tau v v^dagger)
        for row in 0..n {
            let mut qv = zero;
            for j in 0..len {
                qv += q[(row, k + 1 + j)] * v[j];
            }
            let qv = qv * tau;
            for j in 0..len {
                q[(row, k + 1 + j)] -= qv * v[j].conj();
            }
        }
    }
    if n >= 2 {
        offdiag[n - 2] = a[(n - 1, n - 2)];
    }
    let diag = (0..n).map(|i| a[(i, i)].re).collect();
    (diag, offdiag, q)
}

/// Implicit QL on a symmetric tridiagonal matrix (EISPACK `tql2` lineage).
/// `e[i]` couples `i` and `i+1`; on return `d` holds eigenvalues (unsorted)
/// and the result holds the matching eigenvectors, one per entry.
fn tql2(d: &mut [f64], e: &mut [f64]) -> Result<Vec<Vec<f64>>> {
    let n = d.len();
    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row
        })
        .collect();
    let eps = f64::EPSILON;
    let max_iter = 30 * n.max(1);
    let mut f = 0.0;
    // Deflation is judged against the whole matrix scale: a running maximum
    // over the leading entries can underflow for graded inputs such as
    // density matrices with vanishing tails, and then never deflates.
    let tst1 = d.iter().zip(e.iter()).map(|(a, b)| a.abs() + b.abs()).fold(f64::MIN_POSITIVE, f64::max);

    for l in 0..n {
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::NoConvergence { iterations: iter });
                }
                // Wilkinson-type shift from the leading 2x2 block
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.split_at_mut(i + 1);
                    let (vi, vi1) = (&mut lo[i], &mut hi[0]);
                    for k in 0..n {
                        let h = vi1[k];
                        vi1[k] = s * vi[k] + c * h;
                        vi[k] = c * vi[k] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(vt)
}

fn fix_phases(vectors: &mut ComplexMatrix) {
    let n = vectors.rows();
    for col in 0..vectors.cols() {
        let max = (0..n).map(|i| vectors[(i, col)].norm()).fold(0.0, f64::max);
        if max == 0.0 {
            continue;
        }
        let pivot = (0..n)
            .find(|&i| vectors[(i, col)].norm() >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        let z = vectors[(pivot, col)];
        let rot = z.conj() / z.norm();
        for i in 0..n {
            vectors[(i, col)] *= rot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn diagonal_input_sorts_with_permutation_vectors() {
        let m = ComplexMatrix::from_diag(&[1.0, 3.0, 2.0]);
        let eig = eig_hermitian(&m).unwrap();
        assert_eq!(eig.values, alloc::vec![1.0, 2.0, 3.0]);
        let expected_rows = [0usize, 2, 1];
        for (col, &row) in expected_rows.iter().enumerate() {
            assert!((eig.vectors[(row, col)] - c64(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pauli_x() {
        let m = ComplexMatrix::from_row_major(
            2,
            2,
            alloc::vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
        );
        let eig = eig_hermitian(&m).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        // (|0> - |1>)/sqrt2 up to the fixed phase, and (|0> + |1>)/sqrt2
        let v0 = eig.vector(0);
        assert!((v0[0].norm() - s).abs() < 1e-14 && (v0[0] + v0[1]).norm() < 1e-14);
        let v1 = eig.vector(1);
        assert!((v1[0] - c64(s, 0.0)).norm() < 1e-14 && (v1[1] - c64(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_square_and_non_hermitian() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotSquare { .. })));
        let m = ComplexMatrix::from_row_major(
            2,
            2,
            alloc::vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(0.0, 1.0), c64(1.0, 0.0)],
        );
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn complex_tridiagonal_input() {
        // already tridiagonal with complex couplings
        let m = ComplexMatrix::from_row_major(
            3,
            3,
            alloc::vec![
                c64(1.0, 0.0), c64(0.0, 2.0), c64(0.0, 0.0),
                c64(0.0, -2.0), c64(-1.0, 0.0), c64(0.5, 0.5),
                c64(0.0, 0.0), c64(0.5, -0.5), c64(3.0, 0.0),
            ],
        );
        let eig = eig_hermitian(&m).unwrap();
        assert!(eig.reconstruct().max_abs_diff(&m) < 1e-13);
    }
}
