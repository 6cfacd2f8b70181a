//! Test metrics, experiment drivers and run artifacts.

pub mod case_study;
pub mod experiments;
pub mod metrics;
pub mod run_dir;

pub use case_study::{export_case_study, CaseStudy, EdgeBucket};
pub use experiments::{
    ablation_csv, replicate_seed, run_ablation_suite, run_ratio_sweep, run_sensitivity_grid, summary_csv, train_and_evaluate, unpaired_for_ratio, RunResult,
    Summary, Variant,
};
pub use metrics::{adjacency_errors, attribute_errors, evaluate_test, mi_separation, score, weighted_mape, weighted_mse, MetricPair, MiSeparation};
pub use run_dir::{FinalMetrics, RunDir};
