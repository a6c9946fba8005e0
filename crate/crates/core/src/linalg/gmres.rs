//! Restarted GMRES with modified Gram-Schmidt and Givens rotations.

use crate::error::{Error, Result};
use crate::linalg::cg::SolveOutcome;
use crate::linalg::{vec_dot, vec_norm, DenseMatrix};

/// Solves a general nonsingular system `a x = b`.
///
/// `restart` is the Krylov cycle length; `max_iters` bounds the total number
/// of inner iterations across cycles. An exact-subspace breakdown (zero
/// Arnoldi norm) is treated as lucky convergence. If `tol` is not reached the
/// best iterate is returned with `converged = false`.
pub fn gmres_solve(
    a: &DenseMatrix,
    b: &[f64],
    restart: usize,
    max_iters: usize,
    tol: f64,
) -> Result<SolveOutcome> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "gmres_solve",
            detail: format!("{}x{} is not square", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "gmres_solve",
            detail: format!("rhs length {} for {}x{} system", b.len(), n, n),
        });
    }
    if restart == 0 {
        return Err(Error::InvalidConfig("gmres restart must be >= 1".into()));
    }
    let b_norm = vec_norm(b);
    if b_norm == 0.0 {
        return Ok(SolveOutcome {
            x: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
            converged: true,
            residual_history: Vec::new(),
        });
    }

    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let mut total_iters = 0;
    let mut lucky = false;

    'outer: while total_iters < max_iters {
        // r = b - A x
        let ax = a.matvec(&x)?;
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = vec_norm(&r);
        if beta / b_norm <= tol {
            break;
        }
        for v in &mut r {
            *v /= beta;
        }
        let m = restart.min(max_iters - total_iters);
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            let mut w = a.matvec(&basis[k])?;
            for (i, q) in basis.iter().enumerate() {
                let hik = vec_dot(q, &w);
                h[i][k] = hik;
                for (wj, qj) in w.iter_mut().zip(q) {
                    *wj = (-hik).mul_add(*qj, *wj);
                }
            }
            let wnorm = vec_norm(&w);
            if !wnorm.is_finite() {
                return Err(Error::NumericalBreakdown {
                    op: "gmres_solve",
                    detail: format!("non-finite Arnoldi norm at iteration {total_iters}"),
                });
            }
            h[k + 1][k] = wnorm;
            let breakdown = wnorm <= f64::EPSILON * b_norm;
            if !breakdown {
                for v in &mut w {
                    *v /= wnorm;
                }
                basis.push(w);
            }
            // Apply accumulated Givens rotations to the new column.
            for i in 0..k {
                let t = cs[i].mul_add(h[i][k], sn[i] * h[i + 1][k]);
                h[i + 1][k] = (-sn[i]).mul_add(h[i][k], cs[i] * h[i + 1][k]);
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                // Degenerate column: the Krylov space is exhausted and the
                // new direction contributes nothing; solve over k columns.
                k_used = k;
                lucky = true;
                total_iters += 1;
                history.push(g[k].abs() / b_norm);
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total_iters += 1;
            k_used = k + 1;
            let rel = g[k + 1].abs() / b_norm;
            history.push(rel);
            if breakdown {
                lucky = true;
                break;
            }
            if rel <= tol {
                break;
            }
        }

        // Back-substitute y from the triangularized Hessenberg system and
        // update x with the Krylov combination.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_used {
                acc = (-h[i][j]).mul_add(y[j], acc);
            }
            y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, qi) in x.iter_mut().zip(&basis[j]) {
                *xi = yj.mul_add(*qi, *xi);
            }
        }
        if lucky || history.last().is_some_and(|r| *r <= tol) {
            break 'outer;
        }
    }

    let ax = a.matvec(&x)?;
    let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let residual = vec_norm(&res) / b_norm;
    Ok(SolveOutcome {
        x,
        residual,
        iterations: total_iters,
        converged: lucky || residual <= tol,
        residual_history: history,
    })
}
