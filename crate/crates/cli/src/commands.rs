//! Subcommand implementations: argument structs, pipeline invocation, and
//! file output.

use std::path::PathBuf;

use clap::Args;

use attrib_core::estimators::DampingMode;
use attrib_core::harness::{
    default_p_grid, run_convergence_test, run_detection, run_invert_bench, run_selection,
    score_with, BenchSettings, EstimatorKind, ScoringConfig, SyntheticSpec, ToyTask,
};
use attrib_core::hyperpower::ErrorMetric;
use attrib_core::io::{
    generate_dump, read_dump, render_plot, write_bench_csv, write_dump, write_recall_csv,
    write_run_json, write_scores_csv, write_selection_csv, write_traces_csv, PlotConfig,
    PlotSeries,
};
use attrib_core::{Error, Result};

fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorKind>> {
    if names.is_empty() {
        return Err(Error::InvalidConfig("no estimators selected".into()));
    }
    names.iter().map(|n| EstimatorKind::parse(n)).collect()
}

fn damping_mode(mode: &str, lambda: f64) -> Result<DampingMode> {
    match mode {
        "per-block" => Ok(DampingMode::per_block()),
        "fixed" => {
            if !(lambda > 0.0) {
                return Err(Error::InvalidConfig(
                    "fixed damping requires --lambda > 0".into(),
                ));
            }
            Ok(DampingMode::Fixed { lambda })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown damping mode '{other}' (expected per-block|fixed)"
        ))),
    }
}

#[derive(Args)]
pub struct ConvergeArgs {
    /// Matrix dimensions to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![512usize, 1024, 2048, 4096])]
    pub dims: Vec<usize>,
    /// Sample counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![200usize, 800, 6400, 12800])]
    pub samples: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 25)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn converge(args: ConvergeArgs) -> Result<()> {
    let spec = SyntheticSpec {
        dims: args.dims.clone(),
        sample_counts: args.samples.clone(),
        lambda: args.lambda,
        init_scale: args.init_scale,
        iters: args.iters,
        seed: args.seed,
    };
    let cells = run_convergence_test(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    write_traces_csv(&cells, &args.out)?;
    // one SVG per cell, absolute-error traces on a log axis
    for cell in &cells {
        let series: Vec<PlotSeries> = cell
            .traces
            .iter()
            .filter(|t| {
                t.error_metric == ErrorMetric::OracleFrobenius
                    || t.error_metric == ErrorMetric::VectorRelative
            })
            .map(|t| PlotSeries {
                label: format!("{} ({})", t.method, t.error_metric.label()),
                points: t
                    .per_iteration_error
                    .iter()
                    .enumerate()
                    .map(|(i, e)| ((i + 1) as f64, *e))
                    .collect(),
                diverged: t.diverged,
            })
            .collect();
        render_plot(
            &series,
            &PlotConfig {
                title: format!(
                    "inverse approximation error, d={} N={}",
                    cell.dim, cell.samples
                ),
                x_label: "iteration".into(),
                y_label: "error".into(),
                log_y: true,
            },
            &args
                .out
                .join(format!("converge_d{}_n{}.svg", cell.dim, cell.samples)),
        )?;
    }
    write_run_json(
        &serde_json::json!({
            "command": "converge",
            "dims": args.dims,
            "samples": args.samples,
            "lambda": args.lambda,
            "init_scale": args.init_scale,
            "iters": args.iters,
            "seed": args.seed,
        }),
        &args.out,
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct InvertBenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![16usize, 64, 256, 1024, 4096])]
    pub dims: Vec<usize>,
    /// Sample count for the Gram construction.
    #[arg(long, default_value_t = 12800)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn invert_bench(args: InvertBenchArgs) -> Result<()> {
    let settings = BenchSettings {
        dims: args.dims.clone(),
        samples: args.samples,
        seeds: args.seeds,
        base_seed: args.seed,
        ..Default::default()
    };
    let rows = run_invert_bench(&settings)?;
    std::fs::create_dir_all(&args.out)?;
    write_bench_csv(&rows, &args.out)?;
    write_run_json(
        &serde_json::json!({
            "command": "invert-bench",
            "dims": args.dims,
            "samples": args.samples,
            "seeds": args.seeds,
            "seed": args.seed,
            "iters": attrib_core::harness::BENCH_ITERS,
        }),
        &args.out,
    )?;
    for r in &rows {
        println!(
            "d={:5} {:7} error {:.3e} ± {:.1e}  time {:.3}s ± {:.3}s",
            r.dim,
            r.method,
            r.mean_error(),
            r.std_error(),
            r.mean_time(),
            r.std_time()
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Path to a dump manifest (see gen-dump).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["hyperinf".to_string(), "datainf".into(), "lissa".into(), "tracin".into()])]
    pub estimators: Vec<String>,
    /// per-block | fixed
    #[arg(long, default_value = "per-block")]
    pub damping: String,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Schulz iteration count for the curvature inverse.
    #[arg(long, default_value_t = 25)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn score(args: ScoreArgs) -> Result<()> {
    let estimators = parse_estimators(&args.estimators)?;
    let damping = damping_mode(&args.damping, args.lambda)?;
    let dump = read_dump(&args.manifest)?;
    let mut scoring = ScoringConfig {
        damping: damping.clone(),
        ..Default::default()
    };
    if let attrib_core::fisher::Inverter::Schulz(cfg) = &mut scoring.hyperinf.inverter {
        cfg.max_iters = args.iters;
    }
    std::fs::create_dir_all(&args.out)?;
    let mut echo = serde_json::json!({
        "command": "score",
        "manifest": args.manifest.display().to_string(),
        "estimators": args.estimators,
        "damping": args.damping,
        "lambda": args.lambda,
        "iters": args.iters,
        "seed": args.seed,
    });
    for est in estimators {
        let report = score_with(est, &dump, &scoring)?;
        let dir = args.out.join(est.label());
        write_scores_csv(&report, &dir)?;
        echo[est.label()] = report.config_echo.clone();
        if !report.warnings.is_empty() {
            for w in &report.warnings {
                eprintln!("warning [{}]: {w}", est.label());
            }
        }
    }
    write_run_json(&echo, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct DetectArgs {
    #[arg(long, default_value_t = 500)]
    pub n_train: usize,
    #[arg(long, default_value_t = 200)]
    pub n_val: usize,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.2)]
    pub flip: f64,
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["hyperinf".to_string(), "datainf".into(), "lissa".into(), "tracin".into()])]
    pub estimators: Vec<String>,
    /// Inspection-rate grid (percent).
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl DetectArgs {
    fn task(&self) -> ToyTask {
        ToyTask {
            n_train: self.n_train,
            n_val: self.n_val,
            input_dim: self.dim,
            classes: self.classes,
            class_separation: self.separation,
            flip_fraction: self.flip,
            seed: self.seed,
        }
    }
}

pub fn detect(args: DetectArgs) -> Result<()> {
    let estimators = parse_estimators(&args.estimators)?;
    let p_grid = args.p_grid.clone().unwrap_or_else(default_p_grid);
    let report = run_detection(
        &args.task(),
        &estimators,
        &p_grid,
        args.seeds,
        &ScoringConfig::default(),
    )?;
    std::fs::create_dir_all(&args.out)?;
    write_recall_csv(&report, &args.out)?;
    let mut series: Vec<PlotSeries> = report
        .curves
        .iter()
        .map(|c| PlotSeries {
            label: c.estimator.clone(),
            points: report
                .p_grid
                .iter()
                .cloned()
                .zip(c.mean.iter().cloned())
                .collect(),
            diverged: false,
        })
        .collect();
    series.push(PlotSeries {
        label: "oracle".into(),
        points: report
            .p_grid
            .iter()
            .cloned()
            .zip(report.oracle.iter().cloned())
            .collect(),
        diverged: false,
    });
    series.push(PlotSeries {
        label: "random".into(),
        points: report
            .p_grid
            .iter()
            .cloned()
            .zip(report.random_guess.iter().cloned())
            .collect(),
        diverged: false,
    });
    render_plot(
        &series,
        &PlotConfig {
            title: format!(
                "mislabeled-data detection, n={} flip={}",
                args.n_train, args.flip
            ),
            x_label: "inspection rate p (%)".into(),
            y_label: "detection ratio rt(p)".into(),
            log_y: false,
        },
        &args.out.join("recall.svg"),
    )?;
    write_run_json(
        &serde_json::json!({
            "command": "detect",
            "n_train": args.n_train,
            "n_val": args.n_val,
            "dim": args.dim,
            "classes": args.classes,
            "flip": args.flip,
            "separation": args.separation,
            "estimators": args.estimators,
            "p_grid": p_grid,
            "seeds": args.seeds,
            "seed": args.seed,
        }),
        &args.out,
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub detect: DetectArgs,
    /// Selection ratios (percent).
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0f64, 20.0, 40.0])]
    pub k_grid: Vec<f64>,
}

pub fn select(args: SelectArgs) -> Result<()> {
    let estimators = parse_estimators(&args.detect.estimators)?;
    let report = run_selection(
        &args.detect.task(),
        &estimators,
        &args.k_grid,
        args.detect.seeds,
        &ScoringConfig::default(),
    )?;
    std::fs::create_dir_all(&args.detect.out)?;
    write_selection_csv(&report, &args.detect.out)?;
    write_run_json(
        &serde_json::json!({
            "command": "select",
            "n_train": args.detect.n_train,
            "k_grid": args.k_grid,
            "estimators": args.detect.estimators,
            "seeds": args.detect.seeds,
            "seed": args.detect.seed,
        }),
        &args.detect.out,
    )?;
    println!("wrote {}", args.detect.out.display());
    Ok(())
}

#[derive(Args)]
pub struct GenDumpArgs {
    #[arg(long, default_value_t = 20)]
    pub n_examples: usize,
    /// Blocks as name:d:r, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "w:16:2")]
    pub blocks: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_dump(args: GenDumpArgs) -> Result<()> {
    let blocks = args
        .blocks
        .iter()
        .map(|s| {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::InvalidConfig(format!(
                    "block spec '{s}' is not name:d:r"
                )));
            }
            let d: usize = parts[1]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad d in '{s}'")))?;
            let r: usize = parts[2]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad r in '{s}'")))?;
            Ok((parts[0].to_string(), d, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let dump = generate_dump(args.n_examples, &blocks, args.seed)?;
    let manifest = write_dump(&dump, &args.out)?;
    println!("wrote {}", manifest.display());
    Ok(())
}
