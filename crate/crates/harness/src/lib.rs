//! Seeded experiment harness: training runs, learning curves, the ablation
//! grid, the batch-size convergence study, the prioritized-replay
//! composition study, and the kernel property suite.

pub mod ablation;
pub mod batch_study;
pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod per_study;
pub mod runner;
pub mod smoothing;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_seed, RunRecord};
