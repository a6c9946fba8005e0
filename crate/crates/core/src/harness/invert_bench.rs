//! Full-matrix inversion shoot-out: Gaussian elimination (ground truth),
//! conjugate gradient, restarted GMRES and the Schulz iteration, with error
//! and wall time per dimension.
//!
//! CG and GMRES invert by solving the n identity columns. The column
//! recursions run in lockstep over a whole panel so the per-iteration
//! operator application is a single matrix product; each column still
//! follows its own textbook recursion with per-column scalars.

use std::time::Instant;

use crate::error::Result;
use crate::harness::synthetic::{gram_matrix, mix_seed, sample_matrix};
use crate::hyperpower::{schulz_inverse, InitMode, IterationConfig};
use crate::linalg::{frobenius_distance, gaussian_inverse, matmul, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Iteration budget of every iterative method in the bench.
pub const BENCH_ITERS: usize = 20;
/// GMRES panel width: bounds Krylov-basis memory to `(iters+1) * d * width`.
const GMRES_PANEL: usize = 256;

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub dims: Vec<usize>,
    pub samples: usize,
    pub seeds: usize,
    pub lambda: f64,
    pub init_scale: f64,
    pub base_seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            dims: vec![16, 64, 256, 1024, 4096],
            samples: 12800,
            seeds: 3,
            lambda: 0.01,
            init_scale: 5e-4,
            base_seed: 0,
        }
    }
}

/// Error/time summary of one method at one dimension.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub dim: usize,
    pub method: String,
    pub errors: Vec<f64>,
    pub times_s: Vec<f64>,
}

impl BenchRow {
    pub fn mean_error(&self) -> f64 {
        mean(&self.errors)
    }

    pub fn std_error(&self) -> f64 {
        std_dev(&self.errors)
    }

    pub fn mean_time(&self) -> f64 {
        mean(&self.times_s)
    }

    pub fn std_time(&self) -> f64 {
        std_dev(&self.times_s)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn run_invert_bench(settings: &BenchSettings) -> Result<Vec<BenchRow>> {
    let mut rows: Vec<BenchRow> = Vec::new();
    for &d in &settings.dims {
        let mut per_method: Vec<(String, Vec<f64>, Vec<f64>)> = ["ge", "cg", "gmres", "schulz"]
            .iter()
            .map(|m| (m.to_string(), Vec::new(), Vec::new()))
            .collect();
        for seed_idx in 0..settings.seeds.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                settings.base_seed,
                &[d as u64, seed_idx as u64],
            ));
            let s = sample_matrix(&mut rng, d, settings.samples);
            let m = gram_matrix(&s, settings.lambda)?;

            let t0 = Instant::now();
            let ge_inv = gaussian_inverse(&m)?;
            let ge_time = t0.elapsed().as_secs_f64();
            per_method[0].1.push(0.0); // ground truth by definition
            per_method[0].2.push(ge_time);

            let t0 = Instant::now();
            let cg_inv = cg_inverse(&m, BENCH_ITERS)?;
            let cg_time = t0.elapsed().as_secs_f64();
            per_method[1].1.push(frobenius_distance(&ge_inv, &cg_inv)?);
            per_method[1].2.push(cg_time);
            drop(cg_inv);

            let t0 = Instant::now();
            let gm_inv = gmres_inverse(&m, BENCH_ITERS)?;
            let gm_time = t0.elapsed().as_secs_f64();
            per_method[2].1.push(frobenius_distance(&ge_inv, &gm_inv)?);
            per_method[2].2.push(gm_time);
            drop(gm_inv);

            let cfg = IterationConfig {
                max_iters: BENCH_ITERS,
                init_scale: settings.init_scale,
                init_mode: InitMode::ScaledIdentity,
                ..Default::default()
            };
            let t0 = Instant::now();
            let (schulz, _) = schulz_inverse(&m, &cfg, None)?;
            let schulz_time = t0.elapsed().as_secs_f64();
            per_method[3].1.push(frobenius_distance(&ge_inv, &schulz)?);
            per_method[3].2.push(schulz_time);
        }
        for (method, errors, times_s) in per_method {
            rows.push(BenchRow {
                dim: d,
                method,
                errors,
                times_s,
            });
        }
    }
    Ok(rows)
}

/// Inverse via conjugate gradient on every identity column, `iters` steps
/// each, all columns advanced in lockstep (X0 = 0 so R0 = P0 = I).
pub fn cg_inverse(m: &DenseMatrix, iters: usize) -> Result<DenseMatrix> {
    let n = m.rows();
    let mut x = DenseMatrix::zeros(n, n);
    let mut r = DenseMatrix::identity(n);
    let mut p = r.clone();
    let mut rr = column_self_dots(&r);
    for _ in 0..iters {
        let ap = matmul(m, &p)?;
        let pap = column_dots(&p, &ap);
        let alpha: Vec<f64> = rr
            .iter()
            .zip(&pap)
            .map(|(num, den)| if *den != 0.0 { num / den } else { 0.0 })
            .collect();
        for i in 0..n {
            let xr = x.row_mut(i);
            let pr = p.row(i);
            for c in 0..n {
                xr[c] = alpha[c].mul_add(pr[c], xr[c]);
            }
        }
        for i in 0..n {
            let rr_ = r.row_mut(i);
            let apr = ap.row(i);
            for c in 0..n {
                rr_[c] = (-alpha[c]).mul_add(apr[c], rr_[c]);
            }
        }
        let rr_new = column_self_dots(&r);
        let beta: Vec<f64> = rr_new
            .iter()
            .zip(&rr)
            .map(|(num, den)| if *den != 0.0 { num / den } else { 0.0 })
            .collect();
        for i in 0..n {
            let pr = p.row_mut(i);
            let rrow = r.row(i);
            for c in 0..n {
                pr[c] = beta[c].mul_add(pr[c], rrow[c]);
            }
        }
        rr = rr_new;
    }
    Ok(x)
}

fn column_self_dots(m: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        let row = m.row(i);
        for (c, v) in row.iter().enumerate() {
            out[c] = v.mul_add(*v, out[c]);
        }
    }
    out
}

fn column_dots(a: &DenseMatrix, b: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; a.cols()];
    for i in 0..a.rows() {
        let (ra, rb) = (a.row(i), b.row(i));
        for c in 0..a.cols() {
            out[c] = ra[c].mul_add(rb[c], out[c]);
        }
    }
    out
}

/// Inverse via unrestarted `iters`-step GMRES per identity column, advanced
/// panel by panel. Each column owns its Hessenberg system and Givens
/// rotations; the Arnoldi operator application is batched into a matrix
/// product per panel step. A column whose Arnoldi norm vanishes is frozen
/// (its Krylov space is exhausted, the projected solve is already exact).
pub fn gmres_inverse(m: &DenseMatrix, iters: usize) -> Result<DenseMatrix> {
    let n = m.rows();
    let mut x = DenseMatrix::zeros(n, n);
    let width = GMRES_PANEL.min(n);
    let mut col0 = 0;
    while col0 < n {
        let w = width.min(n - col0);
        gmres_panel(m, iters, col0, w, &mut x)?;
        col0 += w;
    }
    Ok(x)
}

fn gmres_panel(
    m: &DenseMatrix,
    iters: usize,
    col0: usize,
    width: usize,
    x: &mut DenseMatrix,
) -> Result<()> {
    let n = m.rows();
    let steps = iters.min(n);
    // basis[j] is the j-th Krylov vector of every column in the panel.
    let mut basis: Vec<DenseMatrix> = Vec::with_capacity(steps + 1);
    // b = e_{col0+c} has norm 1: beta = 1 for every column.
    let mut q0 = DenseMatrix::zeros(n, width);
    for c in 0..width {
        q0.set(col0 + c, c, 1.0);
    }
    basis.push(q0);
    let mut h = vec![vec![vec![0.0f64; width]; steps]; steps + 1]; // h[i][j][col]
    let mut cs = vec![vec![0.0f64; width]; steps];
    let mut sn = vec![vec![0.0f64; width]; steps];
    let mut g = vec![vec![0.0f64; width]; steps + 1];
    let mut active = vec![true; width];
    let mut used = vec![0usize; width];
    for c in 0..width {
        g[0][c] = 1.0;
    }

    for j in 0..steps {
        let mut w = matmul(m, &basis[j])?;
        // Modified Gram-Schmidt against every previous basis panel.
        for (i, q) in basis.iter().enumerate() {
            let dots = column_dots(q, &w);
            for c in 0..width {
                h[i][j][c] = dots[c];
            }
            for row in 0..n {
                let wr = w.row_mut(row);
                let qr = q.row(row);
                for c in 0..width {
                    wr[c] = (-dots[c]).mul_add(qr[c], wr[c]);
                }
            }
        }
        let norms: Vec<f64> = column_self_dots(&w).iter().map(|v| v.sqrt()).collect();
        for c in 0..width {
            h[j + 1][j][c] = norms[c];
        }
        // Normalize surviving columns; frozen or broken-down columns get a
        // zero Krylov vector, which keeps them inert in later products.
        for row in 0..n {
            let wr = w.row_mut(row);
            for c in 0..width {
                if active[c] && norms[c] > f64::EPSILON {
                    wr[c] /= norms[c];
                } else {
                    wr[c] = 0.0;
                }
            }
        }
        for c in 0..width {
            if !active[c] {
                continue;
            }
            // Givens sweep on column c of the new Hessenberg column.
            for i in 0..j {
                let t = cs[i][c].mul_add(h[i][j][c], sn[i][c] * h[i + 1][j][c]);
                h[i + 1][j][c] = (-sn[i][c]).mul_add(h[i][j][c], cs[i][c] * h[i + 1][j][c]);
                h[i][j][c] = t;
            }
            let denom = h[j][j][c].hypot(h[j + 1][j][c]);
            if denom == 0.0 {
                active[c] = false;
                used[c] = j + 1;
                continue;
            }
            cs[j][c] = h[j][j][c] / denom;
            sn[j][c] = h[j + 1][j][c] / denom;
            h[j][j][c] = denom;
            h[j + 1][j][c] = 0.0;
            g[j + 1][c] = -sn[j][c] * g[j][c];
            g[j][c] *= cs[j][c];
            used[c] = j + 1;
            if norms[c] <= f64::EPSILON {
                // lucky breakdown: solution already in the span
                active[c] = false;
            }
        }
        basis.push(w);
    }

    // Back-substitution and solution assembly per column.
    let mut y = vec![vec![0.0f64; width]; steps];
    for c in 0..width {
        let k = used[c];
        for i in (0..k).rev() {
            let mut acc = g[i][c];
            for jj in (i + 1)..k {
                acc = (-h[i][jj][c]).mul_add(y[jj][c], acc);
            }
            y[i][c] = if h[i][i][c] != 0.0 {
                acc / h[i][i][c]
            } else {
                0.0
            };
        }
    }
    for (j, q) in basis.iter().enumerate().take(steps) {
        for row in 0..n {
            let xr = x.row_mut(row);
            let qr = q.row(row);
            for c in 0..width {
                xr[col0 + c] = y[j][c].mul_add(qr[c], xr[col0 + c]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cg_solve, gmres_solve, SpdMatrix};

    fn test_matrix(d: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_matrix(&mut rng, d, n);
        gram_matrix(&s, 0.01).unwrap()
    }

    #[test]
    fn batched_cg_matches_vector_cg_per_column() {
        let m = test_matrix(24, 96, 5);
        let inv = cg_inverse(&m, 20).unwrap();
        let spd = SpdMatrix::new(m.clone()).unwrap();
        for col in [0usize, 7, 23] {
            let mut e = vec![0.0; 24];
            e[col] = 1.0;
            let out = cg_solve(&spd, &e, 20, 0.0).unwrap();
            for i in 0..24 {
                assert!(
                    (inv.get(i, col) - out.x[i]).abs() <= 1e-10 * (1.0 + out.x[i].abs()),
                    "col {col} row {i}"
                );
            }
        }
    }

    #[test]
    fn batched_gmres_matches_vector_gmres_per_column() {
        let m = test_matrix(24, 96, 6);
        let inv = gmres_inverse(&m, 20).unwrap();
        for col in [0usize, 11, 23] {
            let mut e = vec![0.0; 24];
            e[col] = 1.0;
            let out = gmres_solve(&m, &e, 20, 20, 0.0).unwrap();
            for i in 0..24 {
                assert!(
                    (inv.get(i, col) - out.x[i]).abs() <= 1e-8 * (1.0 + out.x[i].abs()),
                    "col {col} row {i}: {} vs {}",
                    inv.get(i, col),
                    out.x[i]
                );
            }
        }
    }

    #[test]
    fn panel_boundaries_are_seamless() {
        // width smaller than the matrix exercises multiple panels
        let m = test_matrix(20, 80, 7);
        let full = gmres_inverse(&m, 15).unwrap();
        let mut panelled = DenseMatrix::zeros(20, 20);
        let mut c0 = 0;
        while c0 < 20 {
            let w = 7.min(20 - c0);
            gmres_panel(&m, 15, c0, w, &mut panelled).unwrap();
            c0 += w;
        }
        assert_eq!(full.data(), panelled.data());
    }

    #[test]
    fn bench_rows_have_sane_structure() {
        let settings = BenchSettings {
            dims: vec![16, 32],
            samples: 128,
            seeds: 2,
            ..Default::default()
        };
        let rows = run_invert_bench(&settings).unwrap();
        assert_eq!(rows.len(), 8);
        for row in &rows {
            assert_eq!(row.errors.len(), 2);
            if row.method == "ge" {
                assert!(row.errors.iter().all(|e| *e == 0.0));
            } else {
                assert!(row.errors.iter().all(|e| e.is_finite()));
            }
        }
        // iterative methods land near the exact inverse on these matrices
        let schulz = rows
            .iter()
            .find(|r| r.dim == 16 && r.method == "schulz")
            .unwrap();
        assert!(schulz.mean_error() < 1e-6, "{}", schulz.mean_error());
    }
}
