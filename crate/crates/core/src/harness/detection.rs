//! Mislabeled-data detection and data-selection pipelines over the toy task.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{
    rank_examples, score_datainf_with, score_exact_with, score_hyperinf, score_lissa_with,
    score_tracin, DampingMode, HyperinfParams, InfluenceReport, RankMode,
};
use crate::harness::synthetic::mix_seed;
use crate::harness::toy::{accuracy, fit_logistic, train_toy_model, ToyTask, TrainConfig};
use crate::linalg::DenseMatrix;

/// Estimators the pipelines know how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    HyperInf,
    DataInf,
    Lissa,
    TracIn,
    Exact,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::HyperInf,
        EstimatorKind::DataInf,
        EstimatorKind::Lissa,
        EstimatorKind::TracIn,
        EstimatorKind::Exact,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::HyperInf => "hyperinf",
            EstimatorKind::DataInf => "datainf",
            EstimatorKind::Lissa => "lissa",
            EstimatorKind::TracIn => "tracin",
            EstimatorKind::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hyperinf" => Ok(EstimatorKind::HyperInf),
            "datainf" => Ok(EstimatorKind::DataInf),
            "lissa" => Ok(EstimatorKind::Lissa),
            "tracin" => Ok(EstimatorKind::TracIn),
            "exact" => Ok(EstimatorKind::Exact),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Scoring configuration shared by the pipelines: per-block trace damping
/// for the curvature estimators, ten LiSSA iterations.
#[derive(Debug, Clone)]
pub struct ScoringConfig {
    pub damping: DampingMode,
    pub lissa_iters: usize,
    pub hyperinf: HyperinfParams,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            damping: DampingMode::per_block(),
            lissa_iters: 10,
            hyperinf: HyperinfParams::default(),
        }
    }
}

pub fn score_with(
    estimator: EstimatorKind,
    dump: &crate::estimators::GradientDump,
    cfg: &ScoringConfig,
) -> Result<InfluenceReport> {
    match estimator {
        EstimatorKind::HyperInf => score_hyperinf(
            dump,
            &HyperinfParams {
                damping: cfg.damping.clone(),
                ..cfg.hyperinf.clone()
            },
        ),
        EstimatorKind::DataInf => score_datainf_with(dump, &cfg.damping),
        EstimatorKind::Lissa => score_lissa_with(dump, cfg.lissa_iters, &cfg.damping),
        EstimatorKind::TracIn => score_tracin(dump),
        EstimatorKind::Exact => score_exact_with(dump, &cfg.damping),
    }
}

/// Detection-ratio curve of one estimator: mean and 95% confidence interval
/// over seeds at each inspection rate.
#[derive(Debug, Clone)]
pub struct RecallCurve {
    pub estimator: String,
    pub mean: Vec<f64>,
    pub ci95: Vec<f64>,
    pub per_seed: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DetectionReport {
    pub p_grid: Vec<f64>,
    pub flip_fraction: f64,
    pub curves: Vec<RecallCurve>,
    /// Best attainable recall at each p: `min(ceil(p n/100)/|mislabeled|, 1)`.
    pub oracle: Vec<f64>,
    /// Expected recall of uniform guessing: `p/100`.
    pub random_guess: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl DetectionReport {
    pub fn curve(&self, estimator: &str) -> Option<&RecallCurve> {
        self.curves.iter().find(|c| c.estimator == estimator)
    }
}

pub fn default_p_grid() -> Vec<f64> {
    (1..=20).map(|i| 5.0 * i as f64).collect()
}

/// Runs the flip-detection experiment: per seed, train on the corrupted set,
/// score every estimator, mark the top-p% highest-scored examples as the
/// suspected flips, and measure recall against the true flipped set.
pub fn run_detection(
    task: &ToyTask,
    estimators: &[EstimatorKind],
    p_grid: &[f64],
    seeds: usize,
    scoring: &ScoringConfig,
) -> Result<DetectionReport> {
    if !(task.flip_fraction > 0.0) {
        return Err(Error::InvalidConfig(
            "detection needs flip_fraction > 0".into(),
        ));
    }
    if p_grid.is_empty() || seeds == 0 {
        return Err(Error::InvalidConfig("empty p_grid or zero seeds".into()));
    }
    for &p in p_grid {
        if !(p > 0.0 && p <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "inspection rate {p} out of (0,100]"
            )));
        }
    }

    let seed_list: Vec<u64> = (0..seeds)
        .map(|s| mix_seed(task.seed, &[s as u64]))
        .collect();
    let mut per_estimator: Vec<Vec<Vec<f64>>> = vec![Vec::new(); estimators.len()];
    let mut oracle = vec![0.0; p_grid.len()];

    for &seed in &seed_list {
        let out = train_toy_model(&task.with_seed(seed))?;
        let n = task.n_train;
        let n_mis = out.flipped.len().max(1);
        let flipped: HashSet<String> = out.flipped.iter().map(|i| i.to_string()).collect();
        for (gi, &p) in p_grid.iter().enumerate() {
            let count = ((p * n as f64) / 100.0).ceil().min(n as f64);
            oracle[gi] = (count / n_mis as f64).min(1.0);
        }
        for (ei, est) in estimators.iter().enumerate() {
            let report = score_with(*est, &out.dump, scoring)?;
            let rt: Vec<f64> = p_grid
                .iter()
                .map(|&p| {
                    let suspects = rank_examples(&report, RankMode::MostHarmful, p)?;
                    let hit = suspects.iter().filter(|id| flipped.contains(*id)).count();
                    Ok(hit as f64 / n_mis as f64)
                })
                .collect::<Result<_>>()?;
            per_estimator[ei].push(rt);
        }
    }

    let curves = estimators
        .iter()
        .zip(per_estimator)
        .map(|(est, per_seed)| {
            let k = p_grid.len();
            let s = per_seed.len() as f64;
            let mean: Vec<f64> = (0..k)
                .map(|i| per_seed.iter().map(|r| r[i]).sum::<f64>() / s)
                .collect();
            let ci95: Vec<f64> = (0..k)
                .map(|i| {
                    if per_seed.len() < 2 {
                        return 0.0;
                    }
                    let var = per_seed
                        .iter()
                        .map(|r| (r[i] - mean[i]) * (r[i] - mean[i]))
                        .sum::<f64>()
                        / (s - 1.0);
                    1.96 * (var / s).sqrt()
                })
                .collect();
            RecallCurve {
                estimator: est.label().to_string(),
                mean,
                ci95,
                per_seed,
            }
        })
        .collect();

    Ok(DetectionReport {
        p_grid: p_grid.to_vec(),
        flip_fraction: task.flip_fraction,
        curves,
        oracle,
        random_guess: p_grid.iter().map(|p| p / 100.0).collect(),
        seeds: seed_list,
    })
}

/// One cell of the selection experiment.
#[derive(Debug, Clone)]
pub struct SelectionCell {
    pub selector: String,
    pub k_percent: f64,
    pub mean_accuracy: f64,
    pub ci95: f64,
    pub per_seed: Vec<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub k_grid: Vec<f64>,
    pub cells: Vec<SelectionCell>,
    pub seeds: Vec<u64>,
}

impl SelectionReport {
    pub fn cell(&self, selector: &str, k: f64) -> Option<&SelectionCell> {
        self.cells
            .iter()
            .find(|c| c.selector == selector && (c.k_percent - k).abs() < 1e-9)
    }
}

/// Data-selection experiment: score the corrupted training pool, keep the
/// most-helpful k% per estimator, retrain from scratch on the subset, and
/// report held-out test accuracy. `random` and `full` rows are included as
/// baselines.
pub fn run_selection(
    task: &ToyTask,
    estimators: &[EstimatorKind],
    k_grid: &[f64],
    seeds: usize,
    scoring: &ScoringConfig,
) -> Result<SelectionReport> {
    if k_grid.is_empty() || seeds == 0 {
        return Err(Error::InvalidConfig("empty k_grid or zero seeds".into()));
    }
    for &k in k_grid {
        if !(k > 0.0 && k <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "selection ratio {k} out of (0,100]"
            )));
        }
    }
    let seed_list: Vec<u64> = (0..seeds)
        .map(|s| mix_seed(task.seed.wrapping_add(0x5E1), &[s as u64]))
        .collect();

    let mut selectors: Vec<String> = estimators.iter().map(|e| e.label().to_string()).collect();
    selectors.push("random".into());
    selectors.push("full".into());

    // accuracies[selector][k] -> per-seed values; the full baseline ignores k.
    let mut acc: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); k_grid.len()]; selectors.len()];
    let mut skipped: Vec<Vec<Option<String>>> = vec![vec![None; k_grid.len()]; selectors.len()];

    for &seed in &seed_list {
        let out = train_toy_model(&task.with_seed(seed))?;
        let reports: Vec<InfluenceReport> = estimators
            .iter()
            .map(|e| score_with(*e, &out.dump, scoring))
            .collect::<Result<_>>()?;
        let mut subset_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x7A]));
        for (ki, &k) in k_grid.iter().enumerate() {
            let count = (((k * task.n_train as f64) / 100.0).ceil() as usize).min(task.n_train);
            for (si, sel) in selectors.iter().enumerate() {
                let indices: Vec<usize> = if sel == "full" {
                    (0..task.n_train).collect()
                } else if sel == "random" {
                    let mut all: Vec<usize> = (0..task.n_train).collect();
                    all.shuffle(&mut subset_rng);
                    all.truncate(count);
                    all
                } else {
                    let ids = rank_examples(&reports[si], RankMode::MostHelpful, k)?;
                    ids.iter().map(|id| id.parse::<usize>().unwrap()).collect()
                };
                if indices.len() < task.classes {
                    skipped[si][ki] = Some(format!(
                        "subset of {} examples is smaller than {} classes",
                        indices.len(),
                        task.classes
                    ));
                    continue;
                }
                let a = retrain_accuracy(&out, &indices, task)?;
                acc[si][ki].push(a);
            }
        }
    }

    let mut cells = Vec::new();
    for (si, sel) in selectors.iter().enumerate() {
        for (ki, &k) in k_grid.iter().enumerate() {
            let vals = &acc[si][ki];
            let s = vals.len() as f64;
            let mean = if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / s
            };
            let ci95 = if vals.len() < 2 {
                0.0
            } else {
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1.0);
                1.96 * (var / s).sqrt()
            };
            cells.push(SelectionCell {
                selector: sel.clone(),
                k_percent: k,
                mean_accuracy: mean,
                ci95,
                per_seed: vals.clone(),
                skipped: skipped[si][ki].clone(),
            });
        }
    }
    Ok(SelectionReport {
        k_grid: k_grid.to_vec(),
        cells,
        seeds: seed_list,
    })
}

fn retrain_accuracy(
    out: &crate::harness::toy::ToyOutcome,
    indices: &[usize],
    task: &ToyTask,
) -> Result<f64> {
    let d = task.input_dim;
    let features = DenseMatrix::from_fn(indices.len(), d, |i, j| {
        out.train.features.get(indices[i], j)
    });
    let labels: Vec<usize> = indices.iter().map(|&i| out.corrupted_labels[i]).collect();
    let (w, _, _, _) = fit_logistic(&features, &labels, task.classes, &TrainConfig::default())?;
    accuracy(&out.test.features, &out.test.labels, &w)
}
