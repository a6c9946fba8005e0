//! LU factorization with partial pivoting and the exact inverse built on it.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Packed LU factors of a square matrix plus the row permutation.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factorizes `a` with partial pivoting. A pivot that is zero to working
    /// precision reports the offending elimination step.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "lu",
                detail: format!("{}x{} is not square", a.rows(), a.cols()),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let pivot_floor = (n as f64) * f64::EPSILON * a.max_abs();
        for k in 0..n {
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor || best == 0.0 {
                return Err(Error::SingularMatrix { pivot: k });
            }
            if p != k {
                perm.swap(k, p);
                swap_rows(&mut lu, k, p);
            }
            let pivot = lu.get(k, k);
            for i in (k + 1)..n {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                // Split the row storage so the pivot row can be read while
                // updating row i below it.
                let (upper, lower) = lu.data_mut().split_at_mut(n * (k + 1));
                let pivot_row = &upper[n * k + k + 1..n * k + n];
                let row_i = &mut lower[n * (i - k - 1) + k + 1..n * (i - k - 1) + n];
                for (x, pk) in row_i.iter_mut().zip(pivot_row) {
                    *x = (-factor).mul_add(*pk, *x);
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `a x = b` for a single right-hand side.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                op: "lu_solve",
                detail: format!("rhs length {} for {}x{} system", b.len(), n, n),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for k in 0..i {
                acc = (-self.lu.get(i, k)).mul_add(x[k], acc);
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in (i + 1)..n {
                acc = (-self.lu.get(i, k)).mul_add(x[k], acc);
            }
            x[i] = acc / self.lu.get(i, i);
        }
        Ok(x)
    }

    /// Computes the full inverse by solving against the permuted identity,
    /// sweeping all right-hand sides together row by row.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut x = DenseMatrix::zeros(n, n);
        for (i, &p) in self.perm.iter().enumerate() {
            x.set(i, p, 1.0);
        }
        // Forward: L y = P I.
        for i in 1..n {
            for k in 0..i {
                let f = self.lu.get(i, k);
                if f != 0.0 {
                    let (done, rest) = x.data_mut().split_at_mut(n * i);
                    let row_k = &done[n * k..n * k + n];
                    let row_i = &mut rest[..n];
                    for (xi, xk) in row_i.iter_mut().zip(row_k) {
                        *xi = (-f).mul_add(*xk, *xi);
                    }
                }
            }
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let d = self.lu.get(i, i);
            for k in (i + 1)..n {
                let f = self.lu.get(i, k);
                if f != 0.0 {
                    let (head, tail) = x.data_mut().split_at_mut(n * (i + 1));
                    let row_k = &tail[n * (k - i - 1)..n * (k - i - 1) + n];
                    let row_i = &mut head[n * i..n * i + n];
                    for (xi, xk) in row_i.iter_mut().zip(row_k) {
                        *xi = (-f).mul_add(*xk, *xi);
                    }
                }
            }
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        x
    }
}

fn swap_rows(m: &mut DenseMatrix, a: usize, b: usize) {
    let n = m.cols();
    let (lo, hi) = (a.min(b), a.max(b));
    let (head, tail) = m.data_mut().split_at_mut(n * hi);
    head[n * lo..n * lo + n].swap_with_slice(&mut tail[..n]);
}

/// Exact inverse via partially pivoted Gaussian elimination. The classical
/// baseline every iterative method is measured against.
pub fn gaussian_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(LuFactors::new(a)?.inverse())
}

/// Solves `a x = b` by LU factorization.
pub fn gaussian_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuFactors::new(a)?.solve(b)
}
