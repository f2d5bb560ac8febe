//! The regularized objective, training with early stopping, multi-trial
//! runs, sweeps and report files.

mod config;
mod loss;
pub mod report;
mod train;
mod trials;

pub use config::{RegSpace, RegTarget, TrainConfig, CONFIG_KEYS};
pub use loss::{total_loss, LossConfig, LossTerms};
pub use train::{evaluate_f1_micro, reg_rows, train, EpochRecord, TrialReport};
pub use trials::{
    draw_train_mask, fixed_splits, run_trials, sweep, AggregateReport, SweepAxis, SweepPoint,
    SweepTable, TrialFailure, AGGREGATE_SCHEMA, SWEEP_SCHEMA,
};
