//! Experiment orchestration: cross-validated evaluation, transfer matrices,
//! sweeps over attack parameters and deterministic result files.

mod cv;
mod experiment;
mod plots;
pub mod seeds;

pub use cv::{crossval_accuracy, CvOptions, CvSummary};
pub use experiment::{
    error_category, evaluate_saved, generalization_accuracy, generate_data, read_results, run_experiment,
    transfer_matrix, write_results, DataSource, ExperimentConfig, ExperimentKind, ExperimentOutput,
    MethodGridConfig, ResultRecord, SizeSweepConfig, TransferConfig, WithinSweepConfig, BASELINE,
    OUTPUT_ROOT_VAR, RESULT_COLUMNS,
};
pub use plots::export_plots;
