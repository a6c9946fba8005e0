//! The influence estimators over a gradient dump: curvature-aware scoring
//! via the generalized Fisher matrix (with Schulz or exact inversion), the
//! Sherman-Morrison closed form, the LiSSA recursion, the first-order
//! (identity curvature) baseline, and the exact damped-Fisher solve that
//! serves as everyone's oracle.
//!
//! Scores follow the sign convention of influence functions: the most
//! helpful examples carry the largest negative values, the most harmful the
//! largest positive ones. Where a score contracts an r x r matrix product to
//! a scalar, the trace is taken; with column-stacked `vec` this equals
//! `vec(v)^T (I_r ⊗ (G+λI)^{-1}) vec(g)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher::{
    build_fim, build_gfim, damping_factor, gfim_inverse_hvp, CurvatureMatrix, GradientBlock,
    Inverter, DAMPING_FLOOR, FLATTENED_CURVATURE_CAP,
};
use crate::hyperpower::IterationConfig;
use crate::linalg::{vec_dot, DenseMatrix, LuFactors};

/// Shape declaration of one named parameter block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockSpec {
    pub name: String,
    pub d: usize,
    pub r: usize,
}

/// Per-example, per-block training gradients plus the averaged validation
/// gradient of every block.
#[derive(Debug, Clone)]
pub struct GradientDump {
    blocks: Vec<BlockSpec>,
    /// `train[example][block]`
    train: Vec<Vec<GradientBlock>>,
    /// `val[block]`
    val: Vec<GradientBlock>,
    example_ids: Vec<String>,
}

impl GradientDump {
    pub fn new(
        blocks: Vec<BlockSpec>,
        train: Vec<Vec<GradientBlock>>,
        val: Vec<GradientBlock>,
        example_ids: Vec<String>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidConfig("dump has no blocks".into()));
        }
        if val.len() != blocks.len() {
            return Err(Error::InvalidConfig(format!(
                "dump has {} blocks but {} validation gradients",
                blocks.len(),
                val.len()
            )));
        }
        if train.len() != example_ids.len() {
            return Err(Error::InvalidConfig(format!(
                "{} examples but {} ids",
                train.len(),
                example_ids.len()
            )));
        }
        for (l, (spec, vg)) in blocks.iter().zip(&val).enumerate() {
            let (d, r) = normalized_shape(spec);
            if vg.d() != d || vg.r() != r {
                return Err(Error::DimensionMismatch {
                    op: "dump",
                    detail: format!(
                        "validation gradient of block '{}' (index {l}) is {}x{}, expected {}x{}",
                        spec.name,
                        vg.d(),
                        vg.r(),
                        d,
                        r
                    ),
                });
            }
        }
        for (k, ex) in train.iter().enumerate() {
            if ex.len() != blocks.len() {
                return Err(Error::DimensionMismatch {
                    op: "dump",
                    detail: format!(
                        "example {k} supplies {} blocks, expected {}",
                        ex.len(),
                        blocks.len()
                    ),
                });
            }
            for (spec, g) in blocks.iter().zip(ex) {
                let (d, r) = normalized_shape(spec);
                if g.d() != d || g.r() != r {
                    return Err(Error::DimensionMismatch {
                        op: "dump",
                        detail: format!(
                            "example {k}, block '{}': {}x{}, expected {}x{}",
                            spec.name,
                            g.d(),
                            g.r(),
                            d,
                            r
                        ),
                    });
                }
            }
        }
        Ok(Self {
            blocks,
            train,
            val,
            example_ids,
        })
    }

    pub fn n_examples(&self) -> usize {
        self.train.len()
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn val_gradient(&self, block: usize) -> &GradientBlock {
        &self.val[block]
    }

    pub fn train_gradient(&self, example: usize, block: usize) -> &GradientBlock {
        &self.train[example][block]
    }

    /// Gradients of one block across all examples, in example order.
    pub fn block_gradients(&self, block: usize) -> Vec<&GradientBlock> {
        self.train.iter().map(|ex| &ex[block]).collect()
    }

    /// Same dump with every validation gradient scaled by `c`.
    pub fn with_scaled_val(&self, c: f64) -> Result<Self> {
        let val = self
            .val
            .iter()
            .map(|g| GradientBlock::new(g.name(), g.values().scaled(c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            blocks: self.blocks.clone(),
            train: self.train.clone(),
            val,
            example_ids: self.example_ids.clone(),
        })
    }
}

/// Gradient blocks store the long dimension first; mirror that here.
fn normalized_shape(spec: &BlockSpec) -> (usize, usize) {
    (spec.d.max(spec.r), spec.d.min(spec.r))
}

/// Per-block damping choice.
#[derive(Debug, Clone, Serialize)]
pub enum DampingMode {
    /// Trace-based per-block factor with the given coefficient.
    PerBlock { coefficient: f64 },
    /// One fixed λ for every block.
    Fixed { lambda: f64 },
}

impl DampingMode {
    pub fn per_block() -> Self {
        DampingMode::PerBlock { coefficient: 0.1 }
    }

    fn resolve(&self, grads: &[GradientBlock]) -> Result<f64> {
        let raw = match self {
            DampingMode::PerBlock { coefficient } => damping_factor(grads, *coefficient)?,
            DampingMode::Fixed { lambda } => {
                if !(*lambda > 0.0) {
                    return Err(Error::InvalidConfig("fixed damping must be > 0".into()));
                }
                *lambda
            }
        };
        Ok(raw.max(DAMPING_FLOOR))
    }
}

/// Scored report over a dump.
#[derive(Debug, Clone)]
pub struct InfluenceReport {
    pub estimator: String,
    /// Ids in example order, matching `scores`.
    pub example_ids: Vec<String>,
    pub scores: Vec<f64>,
    /// `per_block_scores[example][block]`, retained for block-additivity.
    pub per_block_scores: Option<Vec<Vec<f64>>>,
    /// Example ids sorted by ascending score (most helpful first), ties
    /// broken by ascending example index.
    pub ranking_ascending: Vec<String>,
    pub config_echo: serde_json::Value,
    pub warnings: Vec<String>,
    pub diverged: bool,
    /// Largest curvature matrix materialized while scoring, in f64 entries.
    pub peak_curvature_entries: usize,
}

impl InfluenceReport {
    fn assemble(
        estimator: &str,
        dump: &GradientDump,
        per_block: Vec<Vec<f64>>,
        config_echo: serde_json::Value,
        warnings: Vec<String>,
        diverged: bool,
        peak_curvature_entries: usize,
    ) -> Self {
        let scores: Vec<f64> = per_block.iter().map(|row| row.iter().sum()).collect();
        let order = sorted_indices(&scores, false);
        let ranking_ascending = order
            .into_iter()
            .map(|i| dump.example_ids()[i].clone())
            .collect();
        Self {
            estimator: estimator.to_string(),
            example_ids: dump.example_ids().to_vec(),
            scores,
            per_block_scores: Some(per_block),
            ranking_ascending,
            config_echo,
            warnings,
            diverged,
            peak_curvature_entries,
        }
    }
}

/// Indices sorted by score (ascending unless `descending`), ties broken by
/// ascending index.
pub fn sorted_indices(scores: &[f64], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    idx
}

/// Exact influence with the damped flattened Fisher as curvature, inverted
/// by Gaussian elimination block by block. The oracle for every approximate
/// estimator. Refuses blocks whose flattened curvature exceeds the capacity
/// cap.
pub fn score_exact(dump: &GradientDump, lambda: f64) -> Result<InfluenceReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be > 0".into()));
    }
    score_exact_with(dump, &DampingMode::Fixed { lambda })
}

/// `score_exact` with per-block damping (used by the attribution pipelines).
pub fn score_exact_with(dump: &GradientDump, damping: &DampingMode) -> Result<InfluenceReport> {
    let n = dump.n_examples();
    let mut per_block = vec![vec![0.0; dump.blocks().len()]; n];
    let mut lambdas = Vec::new();
    for (l, _) in dump.blocks().iter().enumerate() {
        let grads: Vec<GradientBlock> = dump.block_gradients(l).into_iter().cloned().collect();
        let lam = damping.resolve(&grads)?;
        lambdas.push(lam);
        let fim = build_fim(&grads)?;
        let damped = fim.matrix.as_dense().add_diagonal(lam)?;
        let lu = LuFactors::new(&damped)?;
        let u = lu.solve(&dump.val_gradient(l).to_flat())?;
        for k in 0..n {
            per_block[k][l] = -vec_dot(&u, &dump.train_gradient(k, l).to_flat());
        }
    }
    let peak = dump
        .blocks()
        .iter()
        .map(|b| (b.d * b.r) * (b.d * b.r))
        .max()
        .unwrap_or(0);
    Ok(InfluenceReport::assemble(
        "exact",
        dump,
        per_block,
        serde_json::json!({ "estimator": "exact", "damping": lambdas }),
        Vec::new(),
        false,
        peak,
    ))
}

/// Options for the curvature-aware estimator.
#[derive(Debug, Clone)]
pub struct HyperinfParams {
    pub damping: DampingMode,
    pub inverter: Inverter,
    /// Flatten-first variant: build the full `(rd) x (rd)` Fisher instead of
    /// the `d x d` generalized form (the memory/accuracy comparison path).
    pub use_fim: bool,
}

impl Default for HyperinfParams {
    fn default() -> Self {
        Self {
            damping: DampingMode::per_block(),
            inverter: Inverter::Schulz(IterationConfig::default()),
            use_fim: false,
        }
    }
}

/// Curvature-aware score `-Σ_l tr(v_l^T (G_l + λ_l I)^{-1} g_{k,l})` with the
/// per-block generalized Fisher inverted once (Schulz by default) and the
/// solved validation block cached across examples.
pub fn score_hyperinf(dump: &GradientDump, params: &HyperinfParams) -> Result<InfluenceReport> {
    let n = dump.n_examples();
    let mut per_block = vec![vec![0.0; dump.blocks().len()]; n];
    let mut warnings = Vec::new();
    let mut lambdas = Vec::new();
    let mut residuals = Vec::new();
    let mut peak = 0usize;

    for (l, spec) in dump.blocks().iter().enumerate() {
        let grads: Vec<GradientBlock> = dump.block_gradients(l).into_iter().cloned().collect();
        let lam = params.damping.resolve(&grads)?;
        lambdas.push(lam);
        if params.use_fim {
            let p = grads[0].d() * grads[0].r();
            if p * p > FLATTENED_CURVATURE_CAP {
                return Err(Error::CapacityExceeded {
                    detail: format!("flattened FIM would hold {} entries", p * p),
                });
            }
            let fim = build_fim(&grads)?.with_damping(lam);
            peak = peak.max(p * p);
            let damped = fim.damped();
            let w = match &params.inverter {
                Inverter::Exact => {
                    let lu = LuFactors::new(&damped)?;
                    lu.solve(&dump.val_gradient(l).to_flat())?
                }
                Inverter::Schulz(cfg) => {
                    let (x, _) = crate::hyperpower::schulz_inverse(&damped, cfg, None)?;
                    let r = crate::linalg::inverse_residual(&damped, &x)?;
                    if !(r <= 1e-3) {
                        warnings.push(format!(
                            "block '{}': schulz residual {r:e} above 1e-3",
                            spec.name
                        ));
                    }
                    residuals.push(r);
                    x.matvec(&dump.val_gradient(l).to_flat())?
                }
            };
            for k in 0..n {
                per_block[k][l] = -vec_dot(&w, &dump.train_gradient(k, l).to_flat());
            }
        } else {
            let curv: CurvatureMatrix = build_gfim(&grads)?.with_damping(lam);
            peak = peak.max(curv.dim() * curv.dim());
            let hvp = gfim_inverse_hvp(&curv, dump.val_gradient(l), &params.inverter)?;
            if hvp.warning {
                warnings.push(format!(
                    "block '{}': schulz residual {:e} above 1e-3",
                    spec.name,
                    hvp.schulz_residual.unwrap_or(f64::NAN)
                ));
            }
            if let Some(r) = hvp.schulz_residual {
                residuals.push(r);
            }
            let w = hvp.block;
            for k in 0..n {
                per_block[k][l] = -frobenius_inner(w.values(), dump.train_gradient(k, l).values());
            }
        }
    }
    let inverter_label = match &params.inverter {
        Inverter::Exact => "exact",
        Inverter::Schulz(_) => "schulz",
    };
    Ok(InfluenceReport::assemble(
        "hyperinf",
        dump,
        per_block,
        serde_json::json!({
            "estimator": "hyperinf",
            "damping": lambdas,
            "inverter": inverter_label,
            "use_fim": params.use_fim,
            "schulz_residuals": residuals,
        }),
        warnings,
        false,
        peak,
    ))
}

fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    debug_assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.data()
        .iter()
        .zip(b.data())
        .fold(0.0, |acc, (x, y)| x.mul_add(*y, acc))
}

/// Sherman-Morrison closed-form score, computed entirely from inner products
/// (no d x d matrix is ever materialized):
/// `score_k = -(1/(nλ)) [ n <v,g_k> - Σ_i <v,g_i><g_i,g_k> / (λ + ‖g_i‖²) ]`
/// per block.
pub fn score_datainf(dump: &GradientDump, lambda: f64) -> Result<InfluenceReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be > 0".into()));
    }
    score_datainf_with(dump, &DampingMode::Fixed { lambda })
}

pub fn score_datainf_with(dump: &GradientDump, damping: &DampingMode) -> Result<InfluenceReport> {
    let n = dump.n_examples();
    let mut per_block = vec![vec![0.0; dump.blocks().len()]; n];
    let mut lambdas = Vec::new();
    for (l, _) in dump.blocks().iter().enumerate() {
        let grads: Vec<GradientBlock> = dump.block_gradients(l).into_iter().cloned().collect();
        let lam = damping.resolve(&grads)?;
        lambdas.push(lam);
        let flats: Vec<Vec<f64>> = grads.iter().map(|g| g.to_flat()).collect();
        let v = dump.val_gradient(l).to_flat();
        let v_dot: Vec<f64> = flats.iter().map(|g| vec_dot(&v, g)).collect();
        let sq_norm: Vec<f64> = flats.iter().map(|g| vec_dot(g, g)).collect();
        let scale = 1.0 / (n as f64 * lam);
        for k in 0..n {
            let direct = (n as f64) * vec_dot(&v, &flats[k]);
            let mut correction = 0.0;
            for i in 0..n {
                let w = v_dot[i] / (lam + sq_norm[i]);
                correction = w.mul_add(vec_dot(&flats[i], &flats[k]), correction);
            }
            per_block[k][l] = -scale * (direct - correction);
        }
    }
    Ok(InfluenceReport::assemble(
        "datainf",
        dump,
        per_block,
        serde_json::json!({ "estimator": "datainf", "damping": lambdas }),
        Vec::new(),
        false,
        0,
    ))
}

/// Dense materialization of the Sherman-Morrison inverse
/// `(1/(nλ)) Σ_i (I - g_i g_i^T / (λ + ‖g_i‖²))` from flattened gradients.
/// Reference path for tests and the synthetic harness only.
pub fn datainf_dense_inverse(flat_grads: &[Vec<f64>], lambda: f64) -> Result<DenseMatrix> {
    let n = flat_grads.len();
    let p = flat_grads
        .first()
        .ok_or_else(|| Error::InvalidConfig("datainf_dense_inverse needs gradients".into()))?
        .len();
    let mut acc = DenseMatrix::zeros(p, p);
    for g in flat_grads {
        if g.len() != p {
            return Err(Error::DimensionMismatch {
                op: "datainf_dense_inverse",
                detail: "inconsistent gradient lengths".into(),
            });
        }
        let denom = lambda + vec_dot(g, g);
        for i in 0..p {
            let gi = g[i] / denom;
            let row = acc.row_mut(i);
            for (j, rj) in row.iter_mut().enumerate() {
                *rj = (-gi).mul_add(g[j], *rj);
            }
        }
    }
    for i in 0..p {
        let v = acc.get(i, i) + n as f64;
        acc.set(i, i, v);
    }
    Ok(acc.scaled(1.0 / (n as f64 * lambda)))
}

/// LiSSA-based score: runs the recursion per block on the damped Fisher as
/// an operator (`(F + λI)u = (1/n) Σ_i g_i <g_i, u> + λu`, never `(rd)²`
/// storage), then scores against the final iterate. Norm growth beyond
/// `1e6 ×` the validation gradient flags divergence; scores are still
/// emitted.
pub fn score_lissa(dump: &GradientDump, iters: usize, lambda: f64) -> Result<InfluenceReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be > 0".into()));
    }
    score_lissa_with(dump, iters, &DampingMode::Fixed { lambda })
}

pub fn score_lissa_with(
    dump: &GradientDump,
    iters: usize,
    damping: &DampingMode,
) -> Result<InfluenceReport> {
    if iters < 1 {
        return Err(Error::InvalidConfig("lissa iters must be >= 1".into()));
    }
    let n = dump.n_examples();
    let mut per_block = vec![vec![0.0; dump.blocks().len()]; n];
    let mut diverged = false;
    let mut lambdas = Vec::new();
    for (l, _) in dump.blocks().iter().enumerate() {
        let grads: Vec<GradientBlock> = dump.block_gradients(l).into_iter().cloned().collect();
        let lam = damping.resolve(&grads)?;
        lambdas.push(lam);
        let flats: Vec<Vec<f64>> = grads.iter().map(|g| g.to_flat()).collect();
        let v = dump.val_gradient(l).to_flat();
        let v_norm = crate::linalg::vec_norm(&v);
        let inv_n = 1.0 / n as f64;
        let mut r = v.clone();
        for _ in 0..iters {
            // h = (F + λI) r
            let mut h: Vec<f64> = r.iter().map(|x| lam * x).collect();
            for g in &flats {
                let c = vec_dot(g, &r) * inv_n;
                for (hi, gi) in h.iter_mut().zip(g) {
                    *hi = c.mul_add(*gi, *hi);
                }
            }
            for i in 0..r.len() {
                r[i] = v[i] + r[i] - h[i];
            }
            let r_norm = crate::linalg::vec_norm(&r);
            if !r_norm.is_finite() || r_norm > 1e6 * v_norm.max(f64::MIN_POSITIVE) {
                diverged = true;
            }
        }
        for k in 0..n {
            per_block[k][l] = -vec_dot(&r, &dump.train_gradient(k, l).to_flat());
        }
    }
    Ok(InfluenceReport::assemble(
        "lissa",
        dump,
        per_block,
        serde_json::json!({ "estimator": "lissa", "iters": iters, "damping": lambdas }),
        if diverged {
            vec!["lissa recursion diverged; scores emitted as-is".into()]
        } else {
            Vec::new()
        },
        diverged,
        0,
    ))
}

/// First-order score with identity curvature:
/// `score_k = -Σ_l <vec(v_l), vec(g_{k,l})>`.
pub fn score_tracin(dump: &GradientDump) -> Result<InfluenceReport> {
    let n = dump.n_examples();
    let mut per_block = vec![vec![0.0; dump.blocks().len()]; n];
    for (l, _) in dump.blocks().iter().enumerate() {
        let v = dump.val_gradient(l);
        for k in 0..n {
            per_block[k][l] = -frobenius_inner(v.values(), dump.train_gradient(k, l).values());
        }
    }
    Ok(InfluenceReport::assemble(
        "tracin",
        dump,
        per_block,
        serde_json::json!({ "estimator": "tracin" }),
        Vec::new(),
        false,
        0,
    ))
}

/// Ranking direction for `rank_examples`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Ascending scores: largest negative (most helpful) first.
    MostHelpful,
    /// Descending scores: largest positive (most harmful) first.
    MostHarmful,
}

/// Top `ceil(k_percent * n / 100)` example ids in the requested direction,
/// ties broken by ascending example index.
pub fn rank_examples(
    report: &InfluenceReport,
    mode: RankMode,
    k_percent: f64,
) -> Result<Vec<String>> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::InvalidConfig(format!(
            "k_percent must be in (0, 100], got {k_percent}"
        )));
    }
    let n = report.scores.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let count = (((k_percent * n as f64) / 100.0).ceil() as usize).min(n);
    let order = sorted_indices(&report.scores, matches!(mode, RankMode::MostHarmful));
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| report.example_ids[i].clone())
        .collect())
}
