//! Experiment orchestration for the ListOps encoders: training with
//! plateau learning-rate decay, restarts, sweeps, dataset-size scaling,
//! evaluation and CSV reports.

pub mod config;
pub mod experiments;
pub mod train;

pub use config::TrainConfig;
pub use experiments::{
    evaluate, random_tree_report, run_restarts, scale_sweep, sweep, EvalReport, RestartOutcome, ScalePoint, SweepGrid,
    SweepRow,
};
pub use train::{train, train_on, EpochRecord, RunRecord, TrainError, TrainOutput};
