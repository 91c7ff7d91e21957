//! Experiment configuration, orchestration and result files.

pub mod config;
pub mod fit;
pub mod run;

pub use config::{Experiment, ExperimentConfig, ExperimentKind};
pub use fit::{loglog_fit, FitReport, LogLogFit};
pub use run::{run, RunOutcome, Summary};
