//! Synthetic convergence experiment: approximate the inverse of a damped
//! sample Gram matrix and trace each method's error against the exact
//! inverse across matrix dimension and sample count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::datainf_dense_inverse;
use crate::hyperpower::{
    lissa_hvp_with_oracle, schulz_inverse, ConvergenceTrace, ErrorMetric, InitMode, IterationConfig,
};
use crate::linalg::{frobenius_distance, frobenius_norm, gaussian_inverse, matmul, DenseMatrix};

/// Largest dimension the dense pipeline will materialize.
pub const DIMENSION_CAP: usize = 8192;
/// LiSSA iteration budget in the synthetic comparison.
pub const LISSA_ITERS: usize = 10;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub lambda: f64,
    pub init_scale: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dims: vec![512, 1024, 2048, 4096],
            sample_counts: vec![200, 800, 6400, 12800],
            lambda: 0.01,
            init_scale: 5e-4,
            iters: 25,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.sample_counts.is_empty() {
            return Err(Error::InvalidConfig(
                "dims and sample_counts must be nonempty".into(),
            ));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig("lambda must be > 0".into()));
        }
        if let Some(d) = self.dims.iter().find(|d| **d > DIMENSION_CAP) {
            return Err(Error::CapacityExceeded {
                detail: format!("dimension {d} exceeds cap {DIMENSION_CAP}"),
            });
        }
        Ok(())
    }
}

/// One (dimension, sample count) cell of the sweep.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub dim: usize,
    pub samples: usize,
    /// Largest eigenvalue of M (power iteration), for divergence analysis.
    pub lambda_max: f64,
    pub traces: Vec<ConvergenceTrace>,
}

impl CellResult {
    pub fn trace(&self, method: &str, metric: ErrorMetric) -> Option<&ConvergenceTrace> {
        self.traces
            .iter()
            .find(|t| t.method == method && t.error_metric == metric)
    }
}

/// Deterministic per-cell seed derivation (splitmix64 over the parts).
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Standard-normal sample block, `d x n`, drawn column by column.
pub fn sample_matrix(rng: &mut ChaCha8Rng, d: usize, n: usize) -> DenseMatrix {
    let mut data = Vec::with_capacity(d * n);
    for _ in 0..d * n {
        let v: f64 = StandardNormal.sample(rng);
        data.push(v);
    }
    DenseMatrix::from_vec_unchecked(d, n, data)
}

/// Damped sample Gram matrix `M = (1/N) Σ s_i s_i^T + λ I` from `N`
/// standard-normal vectors, the stand-in for a damped per-sample Fisher.
///
/// The averaging keeps the spectrum O(1) across sample counts, which is the
/// only scaling under which the fixed `X0 = 5e-4 I` initialization converges
/// at every (d, N) in the sweep.
pub fn gram_matrix(samples: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    let n = samples.cols();
    let gram = matmul(samples, &samples.transpose())?;
    gram.scaled(1.0 / n as f64).add_diagonal(lambda)
}

/// Largest eigenvalue by power iteration.
pub fn lambda_max(m: &DenseMatrix, iters: usize, seed: u64) -> Result<f64> {
    let d = m.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut lam = 0.0;
    for _ in 0..iters {
        let w = m.matvec(&v)?;
        let norm = crate::linalg::vec_norm(&w);
        if norm == 0.0 {
            return Ok(0.0);
        }
        lam = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    Ok(lam)
}

/// Runs the sweep: for each (d, N) builds M, computes the exact inverse, and
/// records
/// - the Schulz trace against the oracle (absolute and relative Frobenius),
/// - the one-shot Sherman-Morrison (closed-form) inverse error,
/// - the LiSSA trace on a random vector, normalized by `‖v‖`.
pub fn run_convergence_test(spec: &SyntheticSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &d in &spec.dims {
        for &n in &spec.sample_counts {
            cells.push(run_cell(spec, d, n)?);
        }
    }
    Ok(cells)
}

fn run_cell(spec: &SyntheticSpec, d: usize, n: usize) -> Result<CellResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, &[d as u64, n as u64]));
    let samples = sample_matrix(&mut rng, d, n);
    let m = gram_matrix(&samples, spec.lambda)?;
    let m_inv = gaussian_inverse(&m)?;
    let m_inv_norm = frobenius_norm(&m_inv);
    let lam_max = lambda_max(&m, 60, mix_seed(spec.seed, &[d as u64, n as u64, 1]))?;

    let cfg = IterationConfig {
        max_iters: spec.iters,
        init_scale: spec.init_scale,
        init_mode: InitMode::ScaledIdentity,
        ..Default::default()
    };
    let (_, schulz_abs) = schulz_inverse(&m, &cfg, Some(&m_inv))?;
    let schulz_rel = schulz_abs.rescaled(m_inv_norm, ErrorMetric::OracleRelative);

    // One-shot closed-form inverse from the same samples and damping.
    let flat: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..d).map(|i| samples.get(i, j)).collect())
        .collect();
    let datainf = datainf_dense_inverse(&flat, spec.lambda)?;
    let datainf_err = frobenius_distance(&m_inv, &datainf)?;
    let datainf_abs = ConvergenceTrace {
        method: "datainf".into(),
        per_iteration_error: vec![datainf_err],
        error_metric: ErrorMetric::OracleFrobenius,
        converged: true,
        diverged: false,
        iters_used: 1,
    };
    let datainf_rel = datainf_abs.rescaled(m_inv_norm, ErrorMetric::OracleRelative);

    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let q = m_inv.matvec(&v)?;
    let (_, lissa) = lissa_hvp_with_oracle(&m, &v, LISSA_ITERS, Some(&q))?;

    Ok(CellResult {
        dim: d,
        samples: n,
        lambda_max: lam_max,
        traces: vec![schulz_abs, schulz_rel, datainf_abs, datainf_rel, lissa],
    })
}
