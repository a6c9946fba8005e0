//! Curvature proxies built from per-example gradients: the flattened Fisher
//! information matrix, its generalized d x d form, trace-based damping and
//! the GFIM-backed inverse-Hessian-vector product.
//!
//! Vectorization convention, fixed project-wide: `vec` stacks columns, so
//! `(I_r ⊗ A) vec(V) = vec(A V)` holds exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hyperpower::{schulz_inverse, IterationConfig};
use crate::linalg::{
    frobenius_distance, frobenius_norm, gaussian_inverse, inverse_residual, matmul, DenseMatrix,
    SpdMatrix,
};

/// Largest flattened curvature the exact path will materialize, in entries.
pub const FLATTENED_CURVATURE_CAP: usize = 100_000_000;

/// Damping floor applied when a gradient set is degenerate (all zeros).
pub const DAMPING_FLOOR: f64 = 1e-12;

/// An unflattened per-example gradient of one parameter block, kept in
/// d x r matrix form with d >= r. Ingestion transposes wider-than-tall
/// blocks and records the fact.
#[derive(Debug, Clone)]
pub struct GradientBlock {
    block_name: String,
    values: DenseMatrix,
    transposed_on_ingest: bool,
}

impl GradientBlock {
    pub fn new(block_name: impl Into<String>, values: DenseMatrix) -> Result<Self> {
        if !values.all_finite() {
            return Err(Error::NonFinite {
                context: "gradient block entries".into(),
            });
        }
        let transposed = values.rows() < values.cols();
        Ok(Self {
            block_name: block_name.into(),
            values: if transposed {
                values.transpose()
            } else {
                values
            },
            transposed_on_ingest: transposed,
        })
    }

    pub fn name(&self) -> &str {
        &self.block_name
    }

    /// Long dimension.
    pub fn d(&self) -> usize {
        self.values.rows()
    }

    /// Short dimension (the rank of a low-rank adapter block).
    pub fn r(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn transposed_on_ingest(&self) -> bool {
        self.transposed_on_ingest
    }

    /// Column-stacked flattening, length `d * r`.
    pub fn to_flat(&self) -> Vec<f64> {
        let (d, r) = (self.d(), self.r());
        let mut out = Vec::with_capacity(d * r);
        for c in 0..r {
            for i in 0..d {
                out.push(self.values.get(i, c));
            }
        }
        out
    }

    pub fn squared_frobenius(&self) -> f64 {
        let n = frobenius_norm(&self.values);
        n * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureKind {
    /// Flattened `(rd) x (rd)` Fisher information matrix.
    Fim,
    /// Generalized `d x d` form; the implicit full curvature is
    /// `I_r ⊗ (G/r)` and is never materialized.
    Gfim,
}

/// A symmetric curvature estimate for one parameter block.
#[derive(Debug, Clone)]
pub struct CurvatureMatrix {
    pub kind: CurvatureKind,
    pub matrix: SpdMatrix,
    pub damping: f64,
    pub block_name: String,
    pub sample_count: usize,
}

impl CurvatureMatrix {
    pub fn with_damping(mut self, lambda: f64) -> Self {
        self.damping = lambda.max(DAMPING_FLOOR);
        self
    }

    /// The damped matrix `G + damping * I` that actually gets inverted.
    pub fn damped(&self) -> DenseMatrix {
        self.matrix
            .as_dense()
            .add_diagonal(self.damping)
            .expect("curvature matrices are square")
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

fn check_uniform_shapes(grads: &[GradientBlock]) -> Result<(usize, usize)> {
    let first = grads.first().ok_or_else(|| {
        Error::InvalidConfig("curvature construction needs at least one gradient".into())
    })?;
    let (d, r) = (first.d(), first.r());
    for (idx, g) in grads.iter().enumerate() {
        if g.d() != d || g.r() != r {
            return Err(Error::DimensionMismatch {
                op: "curvature",
                detail: format!(
                    "example {idx} has shape {}x{}, expected {}x{}",
                    g.d(),
                    g.r(),
                    d,
                    r
                ),
            });
        }
    }
    Ok((d, r))
}

/// Flattened Fisher information `(1/n) Σ vec(g_i) vec(g_i)^T`, of dimension
/// `(rd) x (rd)`.
pub fn build_fim(grads: &[GradientBlock]) -> Result<CurvatureMatrix> {
    let (d, r) = check_uniform_shapes(grads)?;
    let p = d * r;
    if p * p > FLATTENED_CURVATURE_CAP {
        return Err(Error::CapacityExceeded {
            detail: format!("flattened FIM would hold {} entries", p * p),
        });
    }
    let n = grads.len();
    // Stack flattened gradients as rows of V, then (1/n) V^T V.
    let mut v = Vec::with_capacity(n * p);
    for g in grads {
        v.extend(g.to_flat());
    }
    let v = DenseMatrix::from_vec_unchecked(n, p, v);
    let f = matmul(&v.transpose(), &v)?.scaled(1.0 / n as f64);
    Ok(CurvatureMatrix {
        kind: CurvatureKind::Fim,
        matrix: SpdMatrix::new(f)?,
        damping: 0.0,
        block_name: grads[0].name().to_string(),
        sample_count: n,
    })
}

/// Generalized Fisher information `(1/n) Σ g_i g_i^T`, of dimension `d x d`
/// independent of `r`.
pub fn build_gfim(grads: &[GradientBlock]) -> Result<CurvatureMatrix> {
    let (d, r) = check_uniform_shapes(grads)?;
    let n = grads.len();
    // Concatenate all blocks side by side, then (1/n) B B^T.
    let mut b = DenseMatrix::zeros(d, n * r);
    for (e, g) in grads.iter().enumerate() {
        for i in 0..d {
            let row = b.row_mut(i);
            for c in 0..r {
                row[e * r + c] = g.values().get(i, c);
            }
        }
    }
    let g = matmul(&b, &b.transpose())?.scaled(1.0 / n as f64);
    Ok(CurvatureMatrix {
        kind: CurvatureKind::Gfim,
        matrix: SpdMatrix::new(g)?,
        damping: 0.0,
        block_name: grads[0].name().to_string(),
        sample_count: n,
    })
}

/// Trace-based damping `coefficient * (n d)^{-1} Σ_i ‖g_i‖_F^2`.
///
/// Zero gradients give zero; callers floor at `DAMPING_FLOOR` when the value
/// is used to damp a matrix.
pub fn damping_factor(grads: &[GradientBlock], coefficient: f64) -> Result<f64> {
    let (d, _) = check_uniform_shapes(grads)?;
    let n = grads.len();
    let total: f64 = grads.iter().map(|g| g.squared_frobenius()).sum();
    Ok(coefficient * total / (n as f64 * d as f64))
}

/// Which inverse backs a curvature solve.
#[derive(Debug, Clone)]
pub enum Inverter {
    /// LU-based exact inverse.
    Exact,
    /// Schulz iteration with the given configuration.
    Schulz(IterationConfig),
}

impl Default for Inverter {
    fn default() -> Self {
        Inverter::Schulz(IterationConfig::default())
    }
}

/// Result of a GFIM-backed inverse-HVP. `schulz_residual` is populated on the
/// iterative path; `warning` flags residuals above `1e-3` (the scores are
/// still produced).
#[derive(Debug, Clone)]
pub struct HvpOutcome {
    pub block: GradientBlock,
    pub schulz_residual: Option<f64>,
    pub warning: bool,
}

/// `(G + λ I_d)^{-1} v` as a d x r block, per the Kronecker identity
/// `(I_r ⊗ A^{-1}) vec(V) = vec(A^{-1} V)`.
pub fn gfim_inverse_hvp(
    curv: &CurvatureMatrix,
    v: &GradientBlock,
    inverter: &Inverter,
) -> Result<HvpOutcome> {
    if curv.kind != CurvatureKind::Gfim {
        return Err(Error::InvalidConfig(
            "gfim_inverse_hvp needs a GFIM curvature matrix".into(),
        ));
    }
    if v.d() != curv.dim() {
        return Err(Error::DimensionMismatch {
            op: "gfim_inverse_hvp",
            detail: format!("block d={} vs curvature dim {}", v.d(), curv.dim()),
        });
    }
    let damped = curv.damped();
    let (inv, residual) = match inverter {
        Inverter::Exact => (gaussian_inverse(&damped)?, None),
        Inverter::Schulz(cfg) => {
            let (x, _) = schulz_inverse(&damped, cfg, None)?;
            let r = inverse_residual(&damped, &x)?;
            (x, Some(r))
        }
    };
    let product = matmul(&inv, v.values())?;
    let warning = residual.is_some_and(|r| !(r <= 1e-3));
    Ok(HvpOutcome {
        block: GradientBlock::new(v.name(), product)?,
        schulz_residual: residual,
        warning,
    })
}

/// Monte-Carlo witness of the Kronecker collapse of the flattened Fisher:
/// draws `samples` gradients with i.i.d. zero-mean standard-normal columns
/// and returns
/// `‖mean(vec g vec g^T) - I_r ⊗ (mean(g g^T)/r)‖_F / ‖I_r ⊗ (mean(g g^T)/r)‖_F`.
pub fn lemma1_gap(d: usize, r: usize, samples: usize, rng_seed: u64) -> Result<f64> {
    if d == 0 || r == 0 || samples == 0 {
        return Err(Error::InvalidConfig(
            "lemma1_gap needs d, r, samples >= 1".into(),
        ));
    }
    let p = d * r;
    if p * p > FLATTENED_CURVATURE_CAP {
        return Err(Error::CapacityExceeded {
            detail: format!("lemma1_gap would accumulate {} entries", p * p),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut fim = vec![0.0f64; p * p];
    let mut gram = vec![0.0f64; d * d];
    let mut flat = vec![0.0f64; p];
    for _ in 0..samples {
        // Column-stacked flat vector of a d x r standard-normal draw.
        for v in flat.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for i in 0..p {
            let fi = flat[i];
            let row = &mut fim[i * p..(i + 1) * p];
            for (j, rj) in row.iter_mut().enumerate() {
                *rj = fi.mul_add(flat[j], *rj);
            }
        }
        // g g^T sums column outer products: columns live at flat[c*d..(c+1)*d].
        for c in 0..r {
            let col = &flat[c * d..(c + 1) * d];
            for i in 0..d {
                let gi = col[i];
                let row = &mut gram[i * d..(i + 1) * d];
                for (j, rj) in row.iter_mut().enumerate() {
                    *rj = gi.mul_add(col[j], *rj);
                }
            }
        }
    }
    let inv_s = 1.0 / samples as f64;
    let fim = DenseMatrix::from_vec_unchecked(p, p, fim.into_iter().map(|v| v * inv_s).collect());
    let gram_mean_over_r: Vec<f64> = gram.into_iter().map(|v| v * inv_s / r as f64).collect();
    // I_r ⊗ (mean gram / r): block-diagonal with r copies.
    let mut kron = DenseMatrix::zeros(p, p);
    for blk in 0..r {
        for i in 0..d {
            for j in 0..d {
                kron.set(blk * d + i, blk * d + j, gram_mean_over_r[i * d + j]);
            }
        }
    }
    Ok(frobenius_distance(&fim, &kron)? / frobenius_norm(&kron))
}
