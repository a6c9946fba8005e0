//! Reproducible experiment drivers: the synthetic inverse-convergence sweep,
//! the inversion shoot-out, and toy-scale detection/selection pipelines.

pub mod detection;
pub mod invert_bench;
pub mod synthetic;
pub mod toy;

pub use detection::{
    default_p_grid, run_detection, run_selection, score_with, DetectionReport, EstimatorKind,
    RecallCurve, ScoringConfig, SelectionCell, SelectionReport,
};
pub use invert_bench::{run_invert_bench, BenchRow, BenchSettings, BENCH_ITERS};
pub use synthetic::{
    gram_matrix, lambda_max, mix_seed, run_convergence_test, sample_matrix, CellResult,
    SyntheticSpec, DIMENSION_CAP,
};
pub use toy::{
    accuracy, train_toy_model, train_toy_model_with, Split, ToyOutcome, ToyTask, TrainConfig,
};
