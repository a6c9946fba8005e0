//! Deterministic dense matrix product.
//!
//! Every output entry is accumulated over `k` in strictly ascending order, so
//! the result is bit-identical to the naive triple loop regardless of row
//! blocking or thread count. Blocking only changes *when* a contribution is
//! added relative to other entries, never the order within one entry.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Rows per parallel work unit. Large enough that a block's B-panel traffic
/// amortizes, small enough to split work on a couple of cores.
const ROW_BLOCK: usize = 64;
/// Panel width over the shared dimension; keeps the streamed B panel inside L2.
const K_BLOCK: usize = 256;
/// Below this many multiply-adds the parallel runway is pure overhead.
const PAR_THRESHOLD: usize = 1 << 16;

/// `a * b` with shape checking.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            detail: format!("{}x{} times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    if m * k * n < PAR_THRESHOLD {
        for (i, out_row) in out.chunks_mut(n).enumerate() {
            accumulate_row(a.row(i), b, out_row);
        }
    } else {
        out.par_chunks_mut(ROW_BLOCK * n)
            .enumerate()
            .for_each(|(blk, out_blk)| {
                let i0 = blk * ROW_BLOCK;
                for kb in (0..k).step_by(K_BLOCK) {
                    let kend = (kb + K_BLOCK).min(k);
                    let mut rows = out_blk.chunks_mut(2 * n);
                    let mut di = 0;
                    for pair in rows.by_ref() {
                        if pair.len() == 2 * n {
                            let (r0, r1) = pair.split_at_mut(n);
                            let a0 = &a.row(i0 + di)[kb..kend];
                            let a1 = &a.row(i0 + di + 1)[kb..kend];
                            for dk in 0..a0.len() {
                                axpy2(a0[dk], a1[dk], b.row(kb + dk), r0, r1);
                            }
                            di += 2;
                        } else {
                            let a0 = &a.row(i0 + di)[kb..kend];
                            for (dk, aik) in a0.iter().enumerate() {
                                axpy(*aik, b.row(kb + dk), pair);
                            }
                            di += 1;
                        }
                    }
                }
            });
    }
    Ok(DenseMatrix::from_vec_unchecked(m, n, out))
}

fn accumulate_row(a_row: &[f64], b: &DenseMatrix, out_row: &mut [f64]) {
    for (kk, aik) in a_row.iter().enumerate() {
        axpy(*aik, b.row(kk), out_row);
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = alpha.mul_add(*xi, *yi);
    }
}

/// Two row updates sharing one pass over `x`; per-entry order unchanged.
#[inline]
fn axpy2(a0: f64, a1: f64, x: &[f64], y0: &mut [f64], y1: &mut [f64]) {
    for ((u, v), xi) in y0.iter_mut().zip(y1.iter_mut()).zip(x) {
        *u = a0.mul_add(*xi, *u);
        *v = a1.mul_add(*xi, *v);
    }
}

/// Frobenius norm, summed in flat index order.
pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.data()
        .iter()
        .fold(0.0, |acc, v| v.mul_add(*v, acc))
        .sqrt()
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            op: "frobenius_distance",
            detail: format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        });
    }
    let s = a.data().iter().zip(b.data()).fold(0.0, |acc, (x, y)| {
        let d = x - y;
        d.mul_add(d, acc)
    });
    Ok(s.sqrt())
}

/// Residual `‖I - a*x‖_F`, the standard inverse-quality measure.
pub fn inverse_residual(a: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
    let ax = matmul(a, x)?;
    let mut s = 0.0;
    for i in 0..ax.rows() {
        for (j, v) in ax.row(i).iter().enumerate() {
            let d = if i == j { 1.0 - v } else { -v };
            s = d.mul_add(d, s);
        }
    }
    Ok(s.sqrt())
}
