//! Experiment orchestration: sweep configuration, execution and plots.

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::{GridAxis, SweepConfig, SweepMethod, SweepMode};
pub use sweep::{run_estimation_sweep, run_prediction_sweep, run_sweep, SweepResult, SweepRow};
