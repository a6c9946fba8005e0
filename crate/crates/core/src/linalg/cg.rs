//! Conjugate gradient solver for symmetric positive definite systems.

use crate::error::{Error, Result};
use crate::linalg::{vec_dot, vec_norm, SpdMatrix};

/// Result of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// Relative residual `‖Ax - b‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
}

/// Solves `a x = b`, stopping at `tol` relative residual or `max_iters`.
pub fn cg_solve(a: &SpdMatrix, b: &[f64], max_iters: usize, tol: f64) -> Result<SolveOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "cg_solve",
            detail: format!("rhs length {} for {}x{} system", b.len(), n, n),
        });
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
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = vec_dot(&r, &r);
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters {
        let ap = a.as_dense().matvec(&p)?;
        let pap = vec_dot(&p, &ap);
        if !pap.is_finite() || !rr.is_finite() {
            return Err(Error::NumericalBreakdown {
                op: "cg_solve",
                detail: format!("non-finite inner product at iteration {iterations}"),
            });
        }
        if pap == 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] = alpha.mul_add(p[i], x[i]);
            r[i] = (-alpha).mul_add(ap[i], r[i]);
        }
        let rr_new = vec_dot(&r, &r);
        iterations += 1;
        let rel = rr_new.sqrt() / b_norm;
        if !rel.is_finite() {
            return Err(Error::NumericalBreakdown {
                op: "cg_solve",
                detail: format!("non-finite residual at iteration {iterations}"),
            });
        }
        history.push(rel);
        if rel <= tol {
            break;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = beta.mul_add(p[i], r[i]);
        }
        rr = rr_new;
    }
    let residual = history.last().copied().unwrap_or(0.0);
    Ok(SolveOutcome {
        x,
        residual,
        iterations,
        converged: residual <= tol,
        residual_history: history,
    })
}
