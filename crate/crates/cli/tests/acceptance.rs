//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Heavy experiments (the d=4096 inversion bench) run once behind a shared
//! fixture; tests that measure wall time or saturate the thread pool take a
//! global lock so concurrent tests cannot skew them.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use attrib_core::estimators::{
    rank_examples, score_datainf, score_exact, score_hyperinf, score_lissa, BlockSpec, DampingMode,
    GradientDump, HyperinfParams, RankMode,
};
use attrib_core::fisher::{build_gfim, lemma1_gap, GradientBlock, Inverter};
use attrib_core::harness::{
    run_convergence_test, run_detection, run_invert_bench, BenchRow, BenchSettings, EstimatorKind,
    ScoringConfig, SyntheticSpec, ToyTask,
};
use attrib_core::hyperpower::{schulz_inverse, ErrorMetric, InitMode, IterationConfig};
use attrib_core::linalg::{frobenius_norm, gaussian_solve, matmul, vec_dot, vec_norm, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn heavy_lock() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Criterion 1: Schulz quadratic convergence on `M = Σ_200 s s^T + 0.01 I`
/// at d=256. Once the residual drops below 0.5, each step must contract
/// quadratically (factor 1.000001 slack) until the 1e-13*d floor; a step
/// whose quadratic target lies below the floor is in the fp-floor regime
/// and ends the check. Runtime < 5 s.
#[test]
fn acceptance_01_schulz_quadratic_convergence() {
    let _guard = heavy_lock();
    let started = Instant::now();
    let d = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = attrib_core::harness::sample_matrix(&mut rng, d, 200);
    let m = matmul(&s, &s.transpose())
        .unwrap()
        .add_diagonal(0.01)
        .unwrap();
    let cfg = IterationConfig {
        max_iters: 40,
        init_scale: 5e-4,
        init_mode: InitMode::ScaledIdentity,
        ..Default::default()
    };
    let (_, trace) = schulz_inverse(&m, &cfg, None).unwrap();
    assert!(!trace.diverged, "schulz diverged");
    let rs = &trace.per_iteration_error;
    let floor = 1e-13 * d as f64;
    let mut checked = 0;
    let mut ok = true;
    let mut detail = String::new();
    for t in 0..rs.len() - 1 {
        if rs[t] >= 0.5 {
            continue;
        }
        let target = rs[t] * rs[t] * 1.000001;
        if target < floor {
            break; // quadratic target below the fp floor: contraction over
        }
        checked += 1;
        if rs[t + 1] > target {
            ok = false;
            detail = format!("step {t}: {} -> {} (target {target})", rs[t], rs[t + 1]);
            break;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = ok && checked >= 2 && elapsed < 5.0;
    verdict(
        "1 (Schulz quadratic convergence)",
        pass,
        &format!(
            "{checked} quadratic steps verified, floor {floor:.2e}, min residual {:.2e}, {elapsed:.2}s {detail}",
            rs.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    );
    assert!(ok, "quadratic contraction violated: {detail}");
    assert!(checked >= 2, "quadratic region never entered");
    assert!(elapsed < 5.0, "runtime {elapsed:.2}s over budget");
}

/// Criterion 2: convergence-figure analogue on (d, N) in {512,1024} x
/// {200,12800} with lambda=0.01, X0=5e-4*I, 25 iterations. Schulz relative
/// error <= 1e-6; the one-shot closed-form error exceeds Schulz's final
/// error; LiSSA grows from iteration 1 to 10 whenever lambda_max(M) > 2.
/// Runtime < 3 min per d=1024 cell.
#[test]
fn acceptance_02_convergence_figure_analogue() {
    let _guard = heavy_lock();
    let mut all_ok = true;
    let mut lines = Vec::new();
    for d in [512usize, 1024] {
        for n in [200usize, 12800] {
            let started = Instant::now();
            let spec = SyntheticSpec {
                dims: vec![d],
                sample_counts: vec![n],
                lambda: 0.01,
                init_scale: 5e-4,
                iters: 25,
                seed: 0,
            };
            let cells = run_convergence_test(&spec).unwrap();
            let cell = &cells[0];
            let elapsed = started.elapsed().as_secs_f64();

            let schulz_rel = cell
                .trace("schulz", ErrorMetric::OracleRelative)
                .unwrap()
                .final_error()
                .unwrap();
            let schulz_abs = cell
                .trace("schulz", ErrorMetric::OracleFrobenius)
                .unwrap()
                .final_error()
                .unwrap();
            let datainf_abs = cell
                .trace("datainf", ErrorMetric::OracleFrobenius)
                .unwrap()
                .final_error()
                .unwrap();
            let lissa = cell.trace("lissa", ErrorMetric::VectorRelative).unwrap();
            let lissa_grew = lissa.per_iteration_error[9] > lissa.per_iteration_error[0];

            let mut cell_ok = schulz_rel <= 1e-6 && datainf_abs > schulz_abs;
            if cell.lambda_max > 2.0 {
                cell_ok &= lissa_grew;
            }
            if d == 1024 {
                cell_ok &= elapsed < 180.0;
            }
            all_ok &= cell_ok;
            lines.push(format!(
                "d={d} N={n}: schulz_rel={schulz_rel:.2e} datainf={datainf_abs:.2e} \
                 lmax={:.1} lissa_grew={lissa_grew} {elapsed:.1}s {}",
                cell.lambda_max,
                if cell_ok { "ok" } else { "VIOLATION" }
            ));
            assert!(
                schulz_rel <= 1e-6,
                "d={d} N={n}: schulz relative error {schulz_rel:e}"
            );
            assert!(
                datainf_abs > schulz_abs,
                "d={d} N={n}: one-shot closed form beat schulz"
            );
            if cell.lambda_max > 2.0 {
                assert!(lissa_grew, "d={d} N={n}: lissa did not diverge");
            }
            if d == 1024 {
                assert!(elapsed < 180.0, "d={d} N={n}: {elapsed:.1}s over budget");
            }
        }
    }
    verdict(
        "2 (convergence figure analogue)",
        all_ok,
        &lines.join(" | "),
    );
}

fn bench_rows() -> &'static Vec<BenchRow> {
    static ROWS: OnceLock<Vec<BenchRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let settings = BenchSettings {
            dims: vec![16, 1024, 4096],
            samples: 12800,
            seeds: 1,
            ..Default::default()
        };
        run_invert_bench(&settings).unwrap()
    })
}

fn bench_row(dim: usize, method: &str) -> &'static BenchRow {
    bench_rows()
        .iter()
        .find(|r| r.dim == dim && r.method == method)
        .unwrap()
}

/// Criterion 3: Schulz-vs-elimination error inside the published bands:
/// [1e-13, 1e-8] at d=16 and [1e-10, 1e-6] at d=4096 (20 iterations,
/// well-conditioned N=12800 construction).
#[test]
fn acceptance_03_error_bands() {
    let _guard = heavy_lock();
    let e16 = bench_row(16, "schulz").mean_error();
    let e4096 = bench_row(4096, "schulz").mean_error();
    let ok16 = (1e-13..=1e-8).contains(&e16);
    let ok4096 = (1e-10..=1e-6).contains(&e4096);
    verdict(
        "3 (inversion error bands)",
        ok16 && ok4096,
        &format!(
            "schulz error d=16: {e16:.3e} (band [1e-13,1e-8], {}), d=4096: {e4096:.3e} (band [1e-10,1e-6], {})",
            if ok16 { "in" } else { "OUT" },
            if ok4096 { "in" } else { "OUT" }
        ),
    );
    assert!(ok16, "d=16 schulz error {e16:e} outside [1e-13, 1e-8]");
    assert!(
        ok4096,
        "d=4096 schulz error {e4096:e} outside [1e-10, 1e-6]"
    );
}

/// Criterion 4: relative wall-time ordering at d in {1024, 4096}:
/// Schulz(20) < CG < GE and Schulz < GMRES on this machine.
#[test]
fn acceptance_04_relative_timing() {
    let _guard = heavy_lock();
    let mut all_ok = true;
    let mut lines = Vec::new();
    for d in [1024usize, 4096] {
        let t_ge = bench_row(d, "ge").mean_time();
        let t_cg = bench_row(d, "cg").mean_time();
        let t_gmres = bench_row(d, "gmres").mean_time();
        let t_schulz = bench_row(d, "schulz").mean_time();
        let ok = t_schulz < t_cg && t_cg < t_ge && t_schulz < t_gmres;
        all_ok &= ok;
        lines.push(format!(
            "d={d}: ge={t_ge:.2}s cg={t_cg:.2}s gmres={t_gmres:.2}s schulz={t_schulz:.2}s {}",
            if ok { "ok" } else { "ORDER VIOLATION" }
        ));
    }
    verdict("4 (relative timing ordering)", all_ok, &lines.join(" | "));
    for d in [1024usize, 4096] {
        let t_ge = bench_row(d, "ge").mean_time();
        let t_cg = bench_row(d, "cg").mean_time();
        let t_gmres = bench_row(d, "gmres").mean_time();
        let t_schulz = bench_row(d, "schulz").mean_time();
        assert!(
            t_schulz < t_cg,
            "d={d}: schulz {t_schulz:.2}s !< cg {t_cg:.2}s"
        );
        assert!(t_cg < t_ge, "d={d}: cg {t_cg:.2}s !< ge {t_ge:.2}s");
        assert!(
            t_schulz < t_gmres,
            "d={d}: schulz {t_schulz:.2}s !< gmres {t_gmres:.2}s"
        );
    }
}

fn random_dump(n: usize, blocks: &[(usize, usize)], seed: u64) -> GradientDump {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<BlockSpec> = blocks
        .iter()
        .enumerate()
        .map(|(i, &(d, r))| BlockSpec {
            name: format!("b{i}"),
            d,
            r,
        })
        .collect();
    let mut draw = |d: usize, r: usize, name: &str| {
        GradientBlock::new(
            name,
            DenseMatrix::from_vec(d, r, (0..d * r).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap(),
        )
        .unwrap()
    };
    let train: Vec<Vec<GradientBlock>> = (0..n)
        .map(|_| specs.iter().map(|b| draw(b.d, b.r, &b.name)).collect())
        .collect();
    let val: Vec<GradientBlock> = specs.iter().map(|b| draw(b.d, b.r, &b.name)).collect();
    let ids = (0..n).map(|i| i.to_string()).collect();
    GradientDump::new(specs, train, val, ids).unwrap()
}

/// Kronecker-lift oracle: per block, solve `(I_r ⊗ (G+λI)) u = vec(v)` dense
/// and score `-<u, vec(g_k)>`.
fn kronecker_lift_scores(dump: &GradientDump, lambda: f64) -> Vec<f64> {
    let n = dump.n_examples();
    let mut scores = vec![0.0; n];
    for l in 0..dump.blocks().len() {
        let grads: Vec<GradientBlock> = dump.block_gradients(l).into_iter().cloned().collect();
        let gfim = build_gfim(&grads).unwrap();
        let damped = gfim.matrix.as_dense().add_diagonal(lambda).unwrap();
        let (d, r) = (grads[0].d(), grads[0].r());
        let p = d * r;
        let mut h = DenseMatrix::zeros(p, p);
        for blk in 0..r {
            for i in 0..d {
                for j in 0..d {
                    h.set(blk * d + i, blk * d + j, damped.get(i, j));
                }
            }
        }
        let u = gaussian_solve(&h, &dump.val_gradient(l).to_flat()).unwrap();
        for k in 0..n {
            scores[k] -= vec_dot(&u, &dump.train_gradient(k, l).to_flat());
        }
    }
    scores
}

/// Criterion 5: estimator oracle equivalences on random dumps
/// (n=20, L=3, d=16, r=2). Runtime < 10 s.
#[test]
fn acceptance_05_estimator_oracles() {
    let started = Instant::now();
    let dump = random_dump(20, &[(16, 2), (16, 2), (16, 2)], 50);
    let lambda = 0.5;
    let lift = kronecker_lift_scores(&dump, lambda);

    let exact_inv = score_hyperinf(
        &dump,
        &HyperinfParams {
            damping: DampingMode::Fixed { lambda },
            inverter: Inverter::Exact,
            use_fim: false,
        },
    )
    .unwrap();
    let mut max_rel_exact: f64 = 0.0;
    for (a, b) in exact_inv.scores.iter().zip(&lift) {
        max_rel_exact = max_rel_exact.max((a - b).abs() / b.abs().max(1e-30));
    }

    let schulz_inv = score_hyperinf(
        &dump,
        &HyperinfParams {
            damping: DampingMode::Fixed { lambda },
            inverter: Inverter::Schulz(IterationConfig::default()),
            use_fim: false,
        },
    )
    .unwrap();
    let mut max_rel_schulz: f64 = 0.0;
    for (a, b) in schulz_inv.scores.iter().zip(&lift) {
        max_rel_schulz = max_rel_schulz.max((a - b).abs() / b.abs().max(1e-30));
    }

    // Sherman-Morrison closed form vs dense materialization.
    let datainf = score_datainf(&dump, lambda).unwrap();
    let mut max_gap_datainf: f64 = 0.0;
    {
        let mut dense_scores = vec![0.0; 20];
        for l in 0..3 {
            let flats: Vec<Vec<f64>> = dump
                .block_gradients(l)
                .into_iter()
                .map(|g| g.to_flat())
                .collect();
            let hinv = attrib_core::estimators::datainf_dense_inverse(&flats, lambda).unwrap();
            let u = hinv.matvec(&dump.val_gradient(l).to_flat()).unwrap();
            for k in 0..20 {
                dense_scores[k] -= vec_dot(&u, &flats[k]);
            }
        }
        for (a, b) in datainf.scores.iter().zip(&dense_scores) {
            max_gap_datainf = max_gap_datainf.max((a - b).abs() / b.abs().max(1.0));
        }
    }

    // LiSSA against the geometric closed form at a half-identity operator.
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let d = 8;
    let blocks = vec![BlockSpec {
        name: "b0".into(),
        d,
        r: 1,
    }];
    let train: Vec<Vec<GradientBlock>> = (0..5)
        .map(|_| {
            vec![GradientBlock::new(
                "b0",
                DenseMatrix::from_vec(
                    d,
                    1,
                    (0..d).map(|_| 1e-12 * rng.gen_range(-1.0..1.0)).collect(),
                )
                .unwrap(),
            )
            .unwrap()]
        })
        .collect();
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let val =
        vec![GradientBlock::new("b0", DenseMatrix::from_vec(d, 1, v.clone()).unwrap()).unwrap()];
    let ids = (0..5).map(|i| i.to_string()).collect();
    let geo_dump = GradientDump::new(blocks, train, val, ids).unwrap();
    let lissa = score_lissa(&geo_dump, 10, 0.5).unwrap();
    let factor = 2.0 * (1.0 - 0.5f64.powi(11));
    let mut max_rel_lissa: f64 = 0.0;
    for k in 0..5 {
        let expect = -factor * vec_dot(&v, &geo_dump.train_gradient(k, 0).to_flat());
        max_rel_lissa = max_rel_lissa.max((lissa.scores[k] - expect).abs() / expect.abs());
    }

    let elapsed = started.elapsed().as_secs_f64();
    let pass = max_rel_exact <= 1e-10
        && max_rel_schulz <= 1e-6
        && max_gap_datainf <= 1e-10
        && max_rel_lissa <= 1e-3
        && elapsed < 10.0;
    verdict(
        "5 (estimator oracle equivalence)",
        pass,
        &format!(
            "lift/exact {max_rel_exact:.2e} (<=1e-10), lift/schulz {max_rel_schulz:.2e} (<=1e-6), \
             closed-form/dense {max_gap_datainf:.2e} (<=1e-10), lissa/geometric {max_rel_lissa:.2e} (<=1e-3), {elapsed:.2}s"
        ),
    );
    assert!(max_rel_exact <= 1e-10);
    assert!(max_rel_schulz <= 1e-6);
    assert!(max_gap_datainf <= 1e-10);
    assert!(max_rel_lissa <= 1e-3);
    assert!(elapsed < 10.0);
}

/// Criterion 6: on r=1 dumps the curvature-aware estimator with the exact
/// inverter reproduces score_exact at the same lambda to 1e-10.
#[test]
fn acceptance_06_rank_one_collapse() {
    let dump = random_dump(25, &[(12, 1), (7, 1)], 60);
    let lambda = 0.3;
    let exact = score_exact(&dump, lambda).unwrap();
    let hyper = score_hyperinf(
        &dump,
        &HyperinfParams {
            damping: DampingMode::Fixed { lambda },
            inverter: Inverter::Exact,
            use_fim: false,
        },
    )
    .unwrap();
    let mut max_gap: f64 = 0.0;
    for (a, b) in hyper.scores.iter().zip(&exact.scores) {
        max_gap = max_gap.max((a - b).abs() / b.abs().max(1e-30));
    }
    verdict(
        "6 (r=1 collapse)",
        max_gap <= 1e-10,
        &format!("max relative gap {max_gap:.2e} (<=1e-10)"),
    );
    assert!(max_gap <= 1e-10, "gap {max_gap:e}");
}

/// Criterion 7: Monte-Carlo Kronecker-collapse witness at d=4, r=2:
/// gap(200k samples) <= 0.02 and at most a fifth of gap(2k samples).
#[test]
fn acceptance_07_lemma_monte_carlo() {
    let small = lemma1_gap(4, 2, 2_000, 7).unwrap();
    let large = lemma1_gap(4, 2, 200_000, 7).unwrap();
    let pass = large <= 0.02 && large <= small / 5.0;
    verdict(
        "7 (Kronecker-collapse Monte Carlo)",
        pass,
        &format!(
            "gap(2e3)={small:.4} gap(2e5)={large:.4} ratio={:.1}",
            small / large
        ),
    );
    assert!(large <= 0.02, "gap {large}");
    assert!(
        large <= small / 5.0,
        "rate check failed: {small} vs {large}"
    );
}

/// Criterion 8: Bartlett identity at a multiclass-logistic model (d=5, C=3):
/// the label-sampled Fisher matches the analytic Hessian
/// `mean_x (diag(p)-pp^T) ⊗ xx^T` to 5% relative Frobenius with 100k draws.
#[test]
fn acceptance_08_bartlett_identity() {
    let (d, c, m, draws) = (5usize, 3usize, 20usize, 100_000usize);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let w = DenseMatrix::from_fn(d, c, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        0.3 * v
    });
    // per-x softmax probabilities
    let probs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut z: Vec<f64> = (0..c)
                .map(|k| (0..d).map(|j| x[j] * w.get(j, k)).sum::<f64>())
                .collect();
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in z.iter_mut() {
                *v = (*v - zmax).exp();
                total += *v;
            }
            z.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let p = d * c;
    // analytic Hessian, column-stacked vec: (diag(p)-pp^T) ⊗ xx^T
    let mut h = DenseMatrix::zeros(p, p);
    for (x, pr) in xs.iter().zip(&probs) {
        for a in 0..c {
            for b in 0..c {
                let cov = if a == b {
                    pr[a] * (1.0 - pr[a])
                } else {
                    -pr[a] * pr[b]
                };
                for i in 0..d {
                    for j in 0..d {
                        let v = h.get(a * d + i, b * d + j) + cov * x[i] * x[j] / m as f64;
                        h.set(a * d + i, b * d + j, v);
                    }
                }
            }
        }
    }
    // label-sampled Fisher
    let mut f = DenseMatrix::zeros(p, p);
    let mut flat = vec![0.0; p];
    for s in 0..draws {
        let i = s % m;
        let u: f64 = rng.gen();
        let mut y = c - 1;
        let mut cum = 0.0;
        for (k, pk) in probs[i].iter().enumerate() {
            cum += pk;
            if u < cum {
                y = k;
                break;
            }
        }
        for k in 0..c {
            let resid = probs[i][k] - if k == y { 1.0 } else { 0.0 };
            for j in 0..d {
                flat[k * d + j] = xs[i][j] * resid;
            }
        }
        for a in 0..p {
            let fa = flat[a];
            for b in 0..p {
                f.set(a, b, f.get(a, b) + fa * flat[b] / draws as f64);
            }
        }
    }
    let gap = attrib_core::linalg::frobenius_distance(&f, &h).unwrap() / frobenius_norm(&h);
    verdict(
        "8 (Bartlett identity)",
        gap <= 0.05,
        &format!("relative Frobenius gap {gap:.4} (<=0.05) over {draws} sampled labels"),
    );
    assert!(gap <= 0.05, "gap {gap}");
}

/// Criterion 9: detection on the default toy task (d=20, C=2, n=500, 20%
/// flips, 3 seeds): curvature-aware mean rt(20) >= 0.40, every curve obeys
/// the recall bound and monotonicity. Runtime < 2 min.
#[test]
fn acceptance_09_detection_properties() {
    let _guard = heavy_lock();
    let started = Instant::now();
    let task = ToyTask::default();
    let p_grid = attrib_core::harness::default_p_grid();
    let report = run_detection(
        &task,
        &[EstimatorKind::HyperInf],
        &p_grid,
        3,
        &ScoringConfig::default(),
    )
    .unwrap();
    let curve = report.curve("hyperinf").unwrap();
    let idx20 = p_grid
        .iter()
        .position(|&p| (p - 20.0).abs() < 1e-9)
        .unwrap();
    let rt20 = curve.mean[idx20];
    let n = task.n_train as f64;
    let n_mis = (task.flip_fraction * n).round();
    let mut bounds_ok = true;
    let mut monotone_ok = true;
    for run in &curve.per_seed {
        for (i, &p) in p_grid.iter().enumerate() {
            let cap = ((p * n / 100.0).ceil() / n_mis).min(1.0);
            if !(run[i] >= 0.0 && run[i] <= cap + 1e-12) {
                bounds_ok = false;
            }
        }
        for w in run.windows(2) {
            if w[1] < w[0] - 1e-12 {
                monotone_ok = false;
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = rt20 >= 0.40 && bounds_ok && monotone_ok && elapsed < 120.0;
    verdict(
        "9 (detection properties)",
        pass,
        &format!(
            "mean rt(20)={rt20:.3} (>=0.40, 2x random), bounds_ok={bounds_ok}, monotone={monotone_ok}, {elapsed:.1}s"
        ),
    );
    assert!(rt20 >= 0.40, "rt(20) = {rt20}");
    assert!(bounds_ok, "recall bound violated");
    assert!(monotone_ok, "recall not monotone");
    assert!(elapsed < 120.0, "runtime {elapsed:.1}s over budget");
}

/// Criterion 10: curvature storage at fixed d=64 is r-independent on the
/// generalized path and grows exactly r^2 on the flatten-first path.
#[test]
fn acceptance_10_curvature_memory() {
    let d = 64;
    let mut gfim_peaks = Vec::new();
    let mut fim_peaks = Vec::new();
    for r in [1usize, 4, 16] {
        let dump = random_dump(6, &[(d, r)], 100 + r as u64);
        let gfim = score_hyperinf(
            &dump,
            &HyperinfParams {
                damping: DampingMode::per_block(),
                inverter: Inverter::Exact,
                use_fim: false,
            },
        )
        .unwrap();
        let fim = score_hyperinf(
            &dump,
            &HyperinfParams {
                damping: DampingMode::per_block(),
                inverter: Inverter::Exact,
                use_fim: true,
            },
        )
        .unwrap();
        gfim_peaks.push(gfim.peak_curvature_entries);
        fim_peaks.push(fim.peak_curvature_entries);
    }
    let gfim_constant = gfim_peaks.iter().all(|&p| p == d * d);
    let fim_quadratic = fim_peaks == vec![d * d, 16 * d * d, 256 * d * d];
    verdict(
        "10 (curvature memory scaling)",
        gfim_constant && fim_quadratic,
        &format!("generalized peaks {gfim_peaks:?} (constant), flattened peaks {fim_peaks:?} (r^2 growth)"),
    );
    assert!(gfim_constant, "{gfim_peaks:?}");
    assert!(fim_quadratic, "{fim_peaks:?}");
}

/// Criterion 11: rerunning converge/detect/score with identical seeds
/// produces byte-identical CSV outputs.
#[test]
fn acceptance_11_cli_determinism() {
    let _guard = heavy_lock();
    let bin = env!("CARGO_BIN_EXE_attrib");
    let base = tempfile::tempdir().unwrap();
    let base = base.path();

    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("spawn attrib");
        assert!(
            out.status.success(),
            "attrib {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let read = |p: std::path::PathBuf| std::fs::read(p).unwrap();

    // converge
    for sub in ["c1", "c2"] {
        let out = base.join(sub).to_str().unwrap().to_string();
        run(&[
            "converge",
            "--dims",
            "64",
            "--samples",
            "200",
            "--seed",
            "7",
            "--out",
            &out,
        ]);
    }
    let converge_same = read(base.join("c1/traces.csv")) == read(base.join("c2/traces.csv"));

    // detect
    for sub in ["d1", "d2"] {
        let out = base.join(sub).to_str().unwrap().to_string();
        run(&[
            "detect",
            "--n-train",
            "80",
            "--n-val",
            "40",
            "--dim",
            "8",
            "--seeds",
            "2",
            "--estimators",
            "hyperinf,tracin",
            "--seed",
            "3",
            "--out",
            &out,
        ]);
    }
    let detect_same = read(base.join("d1/recall.csv")) == read(base.join("d2/recall.csv"));

    // score over a generated dump
    let dump_dir = base.join("dump").to_str().unwrap().to_string();
    run(&[
        "gen-dump",
        "--n-examples",
        "15",
        "--blocks",
        "w:12:2,b:6:1",
        "--seed",
        "9",
        "--out",
        &dump_dir,
    ]);
    let manifest = format!("{dump_dir}/manifest.json");
    for sub in ["s1", "s2"] {
        let out = base.join(sub).to_str().unwrap().to_string();
        run(&[
            "score",
            "--manifest",
            &manifest,
            "--estimators",
            "hyperinf,datainf,lissa,tracin",
            "--out",
            &out,
        ]);
    }
    let score_same = ["hyperinf", "datainf", "lissa", "tracin"].iter().all(|e| {
        read(base.join(format!("s1/{e}/scores.csv")))
            == read(base.join(format!("s2/{e}/scores.csv")))
    });

    let pass = converge_same && detect_same && score_same;
    verdict(
        "11 (CLI determinism)",
        pass,
        &format!("converge={converge_same} detect={detect_same} score={score_same}"),
    );
    assert!(converge_same, "converge reruns differ");
    assert!(detect_same, "detect reruns differ");
    assert!(score_same, "score reruns differ");
}

/// The generated-dump path feeds every estimator without error (round-trip
/// through the binary format included).
#[test]
fn generated_dump_scored_by_every_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let dump =
        attrib_core::io::generate_dump(12, &[("a".to_string(), 10, 3), ("b".to_string(), 5, 1)], 4)
            .unwrap();
    let manifest = attrib_core::io::write_dump(&dump, dir.path()).unwrap();
    let loaded = attrib_core::io::read_dump(&manifest).unwrap();
    for est in EstimatorKind::ALL {
        let report =
            attrib_core::harness::score_with(est, &loaded, &ScoringConfig::default()).unwrap();
        assert_eq!(report.scores.len(), 12);
        assert!(report.scores.iter().all(|s| s.is_finite()));
        let top = rank_examples(&report, RankMode::MostHarmful, 25.0).unwrap();
        assert_eq!(top.len(), 3);
    }
    let v = vec_norm(&[3.0, 4.0]);
    assert!((v - 5.0).abs() < 1e-15);
}
