//! Iterative inverse approximation: the order-p hyperpower family, its p=2
//! Schulz specialization, and the LiSSA inverse-HVP recursion. Every run
//! emits a per-iteration convergence trace; divergence is reported as data,
//! not as a failure.

use crate::error::{Error, Result};
use crate::linalg::{frobenius_distance, gaussian_solve, matmul, vec_norm, DenseMatrix};

/// How the initial iterate is chosen.
#[derive(Debug, Clone, Default)]
pub enum InitMode {
    /// `X0 = init_scale * I`, the convention of the iterative-inverse runs.
    #[default]
    ScaledIdentity,
    /// `X0 = A^T / (‖A‖_1 ‖A‖_inf)`, which converges for any nonsingular A.
    TransposeScaled,
    /// Caller-supplied initial iterate.
    Custom(DenseMatrix),
}

#[derive(Debug, Clone)]
pub struct IterationConfig {
    pub max_iters: usize,
    pub init_scale: f64,
    pub order_p: usize,
    /// Residual threshold `‖I - A X_t‖_F <= tol` for optional early stopping.
    /// `None` (the default) runs the fixed iteration count.
    pub early_stop_tol: Option<f64>,
    pub init_mode: InitMode,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            max_iters: 25,
            init_scale: 5e-4,
            order_p: 2,
            early_stop_tol: None,
            init_mode: InitMode::ScaledIdentity,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidConfig("init_scale must be > 0".into()));
        }
        if self.order_p < 2 {
            return Err(Error::InvalidConfig("order_p must be >= 2".into()));
        }
        Ok(())
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_init_scale(mut self, scale: f64) -> Self {
        self.init_scale = scale;
        self
    }

    pub fn with_order(mut self, p: usize) -> Self {
        self.order_p = p;
        self
    }

    pub fn with_init_mode(mut self, mode: InitMode) -> Self {
        self.init_mode = mode;
        self
    }
}

/// What the recorded per-iteration error measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    /// `‖oracle - X_t‖_F` against a supplied reference inverse.
    OracleFrobenius,
    /// `‖oracle - X_t‖_F / ‖oracle‖_F`.
    OracleRelative,
    /// `‖I - A X_t‖_F`, computable without an oracle.
    ResidualFrobenius,
    /// `‖q - v_t‖ / ‖v‖` for vector iterations against an oracle solve.
    VectorRelative,
    /// `‖A v_t - v‖ / ‖v‖` when no oracle solve is available.
    VectorResidual,
}

impl ErrorMetric {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorMetric::OracleFrobenius => "oracle_frobenius",
            ErrorMetric::OracleRelative => "oracle_relative",
            ErrorMetric::ResidualFrobenius => "residual_frobenius",
            ErrorMetric::VectorRelative => "vector_relative",
            ErrorMetric::VectorResidual => "vector_residual",
        }
    }
}

/// Per-iteration error record of an iterative method.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub method: String,
    pub per_iteration_error: Vec<f64>,
    pub error_metric: ErrorMetric,
    pub converged: bool,
    pub diverged: bool,
    pub iters_used: usize,
}

impl ConvergenceTrace {
    fn new(method: &str, metric: ErrorMetric) -> Self {
        Self {
            method: method.to_string(),
            per_iteration_error: Vec::new(),
            error_metric: metric,
            converged: false,
            diverged: false,
            iters_used: 0,
        }
    }

    pub fn final_error(&self) -> Option<f64> {
        self.per_iteration_error.last().copied()
    }

    /// Same trace with every error divided by `scale`.
    pub fn rescaled(&self, scale: f64, metric: ErrorMetric) -> ConvergenceTrace {
        ConvergenceTrace {
            method: self.method.clone(),
            per_iteration_error: self.per_iteration_error.iter().map(|e| e / scale).collect(),
            error_metric: metric,
            converged: self.converged,
            diverged: self.diverged,
            iters_used: self.iters_used,
        }
    }
}

fn initial_iterate(a: &DenseMatrix, cfg: &IterationConfig) -> Result<DenseMatrix> {
    match &cfg.init_mode {
        InitMode::ScaledIdentity => Ok(DenseMatrix::identity(a.rows()).scaled(cfg.init_scale)),
        InitMode::TransposeScaled => stabilized_init(a),
        InitMode::Custom(x0) => {
            if x0.rows() != a.rows() || x0.cols() != a.cols() {
                return Err(Error::DimensionMismatch {
                    op: "hyperpower_inverse",
                    detail: "custom X0 shape differs from A".into(),
                });
            }
            Ok(x0.clone())
        }
    }
}

/// `X0 = A^T / (‖A‖_1 ‖A‖_inf)`. Guarantees `ρ(I - A X0) < 1` for any
/// nonsingular `A`, so the Schulz iteration converges from it.
pub fn stabilized_init(a: &DenseMatrix) -> Result<DenseMatrix> {
    let denom = a.norm_one() * a.norm_inf();
    if denom == 0.0 {
        return Err(Error::InvalidConfig(
            "stabilized_init: zero matrix has no inverse".into(),
        ));
    }
    Ok(a.transpose().scaled(1.0 / denom))
}

/// Order-p hyperpower iteration
/// `X_{t+1} = X_t (I + T_t + ... + T_t^{p-1})`, `T_t = I - A X_t`.
///
/// With an oracle the trace records `‖oracle - X_t‖_F` per iteration;
/// otherwise it records the residual `‖I - A X_t‖_F`. Divergence (non-finite
/// iterate) truncates the trace and sets the `diverged` flag.
pub fn hyperpower_inverse(
    a: &DenseMatrix,
    cfg: &IterationConfig,
    oracle: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, ConvergenceTrace)> {
    run_hyperpower(a, cfg, oracle, "hyperpower")
}

/// The p=2 member: `X_{t+1} = X_t (2I - A X_t)`, two matrix products per
/// iteration. Bit-identical to `hyperpower_inverse` with `order_p = 2`.
pub fn schulz_inverse(
    a: &DenseMatrix,
    cfg: &IterationConfig,
    oracle: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, ConvergenceTrace)> {
    let cfg = IterationConfig {
        order_p: 2,
        ..cfg.clone()
    };
    run_hyperpower(a, &cfg, oracle, "schulz")
}

fn run_hyperpower(
    a: &DenseMatrix,
    cfg: &IterationConfig,
    oracle: Option<&DenseMatrix>,
    method: &str,
) -> Result<(DenseMatrix, ConvergenceTrace)> {
    cfg.validate()?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "hyperpower_inverse",
            detail: format!("{}x{} is not square", a.rows(), a.cols()),
        });
    }
    if let Some(o) = oracle {
        if o.rows() != a.rows() || o.cols() != a.cols() {
            return Err(Error::DimensionMismatch {
                op: "hyperpower_inverse",
                detail: "oracle shape differs from A".into(),
            });
        }
    }

    let metric = if oracle.is_some() {
        ErrorMetric::OracleFrobenius
    } else {
        ErrorMetric::ResidualFrobenius
    };
    let mut trace = ConvergenceTrace::new(method, metric);
    let need_residual = oracle.is_none() || cfg.early_stop_tol.is_some();
    let mut x = initial_iterate(a, cfg)?;

    for _ in 0..cfg.max_iters {
        let ax = matmul(a, &x)?;
        if !ax.all_finite() {
            trace.diverged = true;
            break;
        }
        let next = if cfg.order_p == 2 {
            // Fused p=2 path: X (2I - AX).
            let mut s = ax.scaled(-1.0);
            for i in 0..s.rows() {
                let v = s.get(i, i) + 2.0;
                s.set(i, i, v);
            }
            matmul(&x, &s)?
        } else {
            // T = I - AX, then Horner: S = I + T (I + T (...)).
            let t = subtract_from_identity(&ax);
            let mut s = add_identity(&t);
            for _ in 2..cfg.order_p {
                s = add_identity(&matmul(&t, &s)?);
            }
            matmul(&x, &s)?
        };
        if !next.all_finite() {
            trace.diverged = true;
            break;
        }
        x = next;
        trace.iters_used += 1;

        let residual = if need_residual {
            let r = crate::linalg::inverse_residual(a, &x)?;
            if !r.is_finite() {
                trace.diverged = true;
                trace.iters_used -= 1;
                break;
            }
            Some(r)
        } else {
            None
        };
        let err = match oracle {
            Some(o) => frobenius_distance(o, &x)?,
            None => residual.unwrap(),
        };
        if !err.is_finite() {
            trace.diverged = true;
            trace.iters_used -= 1;
            break;
        }
        trace.per_iteration_error.push(err);
        if let (Some(tol), Some(r)) = (cfg.early_stop_tol, residual) {
            if r <= tol {
                trace.converged = true;
                break;
            }
        }
    }
    trace.per_iteration_error.truncate(trace.iters_used);
    if cfg.early_stop_tol.is_none() {
        trace.converged = !trace.diverged;
    }
    Ok((x, trace))
}

fn subtract_from_identity(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    let mut out = m.scaled(-1.0);
    for i in 0..n {
        let v = out.get(i, i) + 1.0;
        out.set(i, i, v);
    }
    out
}

fn add_identity(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let v = out.get(i, i) + 1.0;
        out.set(i, i, v);
    }
    out
}

/// LiSSA recursion `v_j = v + (I - A) v_{j-1}`, `v_0 = v`, approximating
/// `A^{-1} v`.
///
/// The trace records `‖A^{-1}v - v_j‖ / ‖v‖` per iteration; the reference
/// solve is done directly for `d <= 4096`, otherwise the residual
/// `‖A v_j - v‖ / ‖v‖` is recorded instead. The recursion is implemented
/// verbatim: no damping or step size, divergence expected whenever the
/// spectrum of `A` leaves (0, 2).
pub fn lissa_hvp(
    a: &DenseMatrix,
    v: &[f64],
    max_iters: usize,
) -> Result<(Vec<f64>, ConvergenceTrace)> {
    let oracle = if a.rows() <= 4096 {
        Some(gaussian_solve(a, v)?)
    } else {
        None
    };
    lissa_hvp_with_oracle(a, v, max_iters, oracle.as_deref())
}

/// `lissa_hvp` with a precomputed reference solve, so callers that already
/// hold `A^{-1} v` avoid the extra factorization.
pub fn lissa_hvp_with_oracle(
    a: &DenseMatrix,
    v: &[f64],
    max_iters: usize,
    oracle: Option<&[f64]>,
) -> Result<(Vec<f64>, ConvergenceTrace)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "lissa_hvp",
            detail: format!("{}x{} is not square", a.rows(), a.cols()),
        });
    }
    if v.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "lissa_hvp",
            detail: format!("vector length {} for dim {}", v.len(), a.rows()),
        });
    }
    if max_iters < 1 {
        return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
    }
    let metric = if oracle.is_some() {
        ErrorMetric::VectorRelative
    } else {
        ErrorMetric::VectorResidual
    };
    let mut trace = ConvergenceTrace::new("lissa", metric);
    let v_norm = vec_norm(v).max(f64::MIN_POSITIVE);
    let mut cur = v.to_vec();

    for _ in 0..max_iters {
        let av = a.matvec(&cur)?;
        let next: Vec<f64> = v
            .iter()
            .zip(cur.iter().zip(&av))
            .map(|(vi, (ci, ai))| vi + ci - ai)
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            trace.diverged = true;
            break;
        }
        cur = next;
        trace.iters_used += 1;
        let err = match oracle {
            Some(q) => {
                let d: f64 = q
                    .iter()
                    .zip(&cur)
                    .fold(0.0, |acc, (qi, ci)| {
                        let d = qi - ci;
                        d.mul_add(d, acc)
                    })
                    .sqrt();
                d / v_norm
            }
            None => {
                let av = a.matvec(&cur)?;
                let d: f64 = av
                    .iter()
                    .zip(v)
                    .fold(0.0, |acc, (ai, vi)| {
                        let d = ai - vi;
                        d.mul_add(d, acc)
                    })
                    .sqrt();
                d / v_norm
            }
        };
        if !err.is_finite() {
            trace.diverged = true;
            trace.iters_used -= 1;
            break;
        }
        trace.per_iteration_error.push(err);
    }
    trace.per_iteration_error.truncate(trace.iters_used);
    trace.converged = !trace.diverged
        && trace
            .per_iteration_error
            .last()
            .zip(trace.per_iteration_error.first())
            .map(|(last, first)| last <= first)
            .unwrap_or(false);
    Ok((cur, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_inverse, inverse_residual};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(d: usize, n: usize, lambda: f64, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseMatrix::zeros(d, d);
        for _ in 0..n {
            let s: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..d {
                for j in 0..d {
                    m.set(i, j, m.get(i, j) + s[i] * s[j] / n as f64);
                }
            }
        }
        m.add_diagonal(lambda).unwrap()
    }

    #[test]
    fn scalar_recurrence_on_identity() {
        // a = I, X0 = 0.5 I: per-entry recurrence x <- x(2-x), so the
        // diagonal residual after t iterations is (1-0.5)^(2^t).
        let d = 4;
        let a = DenseMatrix::identity(d);
        let cfg = IterationConfig::default()
            .with_max_iters(3)
            .with_init_mode(InitMode::Custom(DenseMatrix::identity(d).scaled(0.5)));
        let (x, trace) = hyperpower_inverse(&a, &cfg, None).unwrap();
        let expect = 0.5f64.powi(8);
        for i in 0..d {
            assert!((1.0 - x.get(i, i) - expect).abs() < 1e-15);
        }
        let expect_frob = (d as f64).sqrt() * expect;
        assert!((trace.per_iteration_error[2] - expect_frob).abs() < 1e-12);
    }

    #[test]
    fn diagonal_two_converges() {
        let a = DenseMatrix::diagonal(&[2.0]);
        let cfg = IterationConfig::default()
            .with_max_iters(30)
            .with_init_scale(0.1);
        let (x, trace) = schulz_inverse(&a, &cfg, None).unwrap();
        assert!((x.get(0, 0) - 0.5).abs() < 1e-14);
        assert!(trace.converged);
    }

    #[test]
    fn schulz_identity_fixed_point() {
        let d = 3;
        let a = DenseMatrix::identity(d);
        let x0 = DenseMatrix::identity(d).scaled(0.3);
        let cfg = IterationConfig::default()
            .with_max_iters(1)
            .with_init_mode(InitMode::Custom(x0));
        let (x, _) = schulz_inverse(&a, &cfg, None).unwrap();
        // X1 = X0 (2I - X0) = 0.3 * 1.7 I
        for i in 0..d {
            assert!((x.get(i, i) - 0.51).abs() < 1e-15);
        }
        let cfg2 = IterationConfig::default()
            .with_max_iters(1)
            .with_init_mode(InitMode::Custom(DenseMatrix::identity(d)));
        let (fixed, _) = schulz_inverse(&a, &cfg2, None).unwrap();
        assert_eq!(fixed, DenseMatrix::identity(d));
    }

    #[test]
    fn schulz_matches_hyperpower_p2_bitwise() {
        let a = random_spd(16, 64, 0.1, 41);
        let cfg = IterationConfig::default()
            .with_max_iters(12)
            .with_init_scale(0.05);
        let (x1, t1) = schulz_inverse(&a, &cfg, None).unwrap();
        let (x2, t2) = hyperpower_inverse(&a, &cfg.clone().with_order(2), None).unwrap();
        assert_eq!(x1.data(), x2.data());
        assert_eq!(t1.per_iteration_error, t2.per_iteration_error);
    }

    #[test]
    fn order_three_no_slower_than_schulz() {
        let a = random_spd(32, 128, 0.1, 42);
        let iters_to = |p: usize| {
            let cfg = IterationConfig {
                max_iters: 60,
                order_p: p,
                early_stop_tol: Some(1e-10),
                init_mode: InitMode::TransposeScaled,
                ..Default::default()
            };
            let (_, trace) = hyperpower_inverse(&a, &cfg, None).unwrap();
            assert!(trace.converged, "p={p} did not reach 1e-10");
            trace.iters_used
        };
        assert!(iters_to(3) <= iters_to(2));
    }

    #[test]
    fn schulz_d16_close_to_exact() {
        // Final error within 100x of the exact-inverse residual floor.
        let m = random_spd(16, 12800, 0.01, 43);
        let inv = gaussian_inverse(&m).unwrap();
        let cfg = IterationConfig::default().with_max_iters(25);
        let (_, trace) = schulz_inverse(&m, &cfg, Some(&inv)).unwrap();
        let ge_residual = inverse_residual(&m, &inv).unwrap();
        let err = trace.final_error().unwrap();
        assert!(
            err <= 100.0 * ge_residual.max(1e-15),
            "schulz err {err:e} vs GE residual {ge_residual:e}"
        );
    }

    #[test]
    fn divergence_is_flagged_not_panicked() {
        // lambda_max * init_scale > 2 makes Schulz blow up.
        let a = DenseMatrix::diagonal(&[5.0, 1.0]);
        let cfg = IterationConfig::default()
            .with_max_iters(60)
            .with_init_mode(InitMode::Custom(DenseMatrix::identity(2)));
        let (_, trace) = schulz_inverse(&a, &cfg, None).unwrap();
        assert!(trace.diverged);
        assert!(!trace.converged);
        assert_eq!(trace.per_iteration_error.len(), trace.iters_used);
        assert!(trace.per_iteration_error.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn quadratic_contraction_in_the_basin() {
        let m = random_spd(24, 96, 0.05, 44);
        let cfg = IterationConfig {
            max_iters: 40,
            init_mode: InitMode::TransposeScaled,
            ..Default::default()
        };
        let (_, trace) = schulz_inverse(&m, &cfg, None).unwrap();
        let floor = 1e-13 * 24.0;
        let rs = &trace.per_iteration_error;
        for t in 0..rs.len() - 1 {
            if rs[t] < 0.5 && rs[t] * rs[t] * 1.000001 >= floor {
                assert!(
                    rs[t + 1] <= rs[t] * rs[t] * 1.000001,
                    "no quadratic step at t={t}: {} -> {}",
                    rs[t],
                    rs[t + 1]
                );
            }
        }
    }

    #[test]
    fn symmetric_iterates_stay_symmetric() {
        let m = random_spd(12, 48, 0.1, 45);
        let cfg = IterationConfig::default()
            .with_max_iters(15)
            .with_init_scale(0.05);
        let (x, _) = schulz_inverse(&m, &cfg, None).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!((x.get(i, j) - x.get(j, i)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stabilized_init_properties() {
        let i4 = DenseMatrix::identity(4);
        assert_eq!(stabilized_init(&i4).unwrap(), i4);
        let a = DenseMatrix::diagonal(&[2.0]);
        let x0 = stabilized_init(&a).unwrap();
        assert!((x0.get(0, 0) - 0.5).abs() < 1e-15);
        assert!(stabilized_init(&DenseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn stabilized_init_converges_on_random_spd() {
        let m = random_spd(64, 256, 0.05, 46);
        let cfg = IterationConfig {
            max_iters: 60,
            early_stop_tol: Some(1e-8),
            init_mode: InitMode::TransposeScaled,
            ..Default::default()
        };
        let (_, trace) = schulz_inverse(&m, &cfg, None).unwrap();
        assert!(trace.converged, "final residual {:?}", trace.final_error());
    }

    #[test]
    fn lissa_identity_fixed_point() {
        let a = DenseMatrix::identity(4);
        let v = vec![1.0, 2.0, -1.0, 0.5];
        let (out, trace) = lissa_hvp(&a, &v, 5).unwrap();
        assert_eq!(out, v);
        assert!(trace.per_iteration_error.iter().all(|e| *e < 1e-14));
    }

    #[test]
    fn lissa_geometric_convergence() {
        // a = 0.5 I: v_j -> 2v with the error halving each iteration.
        let d = 6;
        let a = DenseMatrix::identity(d).scaled(0.5);
        let v: Vec<f64> = (0..d).map(|i| (i as f64) - 2.0).collect();
        let (out, trace) = lissa_hvp(&a, &v, 20).unwrap();
        for (o, vi) in out.iter().zip(&v) {
            assert!((o - 2.0 * vi).abs() < 1e-5);
        }
        for w in trace.per_iteration_error.windows(2) {
            let ratio = w[1] / w[0].max(f64::MIN_POSITIVE);
            assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
        }
        assert!(trace.converged);
    }

    #[test]
    fn lissa_diverges_beyond_spectral_radius() {
        let a = DenseMatrix::diagonal(&[2.5, 1.0, 0.5]);
        let v = vec![1.0, 1.0, 1.0];
        let (_, trace) = lissa_hvp(&a, &v, 10).unwrap();
        assert!(trace.per_iteration_error[9] > trace.per_iteration_error[0]);
        assert!(!trace.converged);
    }
}
