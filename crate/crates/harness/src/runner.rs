//! Parallel execution of independent seeded runs.

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{run_seed, RunRecord};

/// One unit of work: a labelled configuration and a seed.
#[derive(Debug, Clone)]
pub struct Task {
    pub label: String,
    pub config: ExperimentConfig,
    pub seed: u64,
}

/// Tasks for every seed of `config`, in seed order.
pub fn seed_tasks(config: &ExperimentConfig, label: &str) -> Vec<Task> {
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
        .into_iter()
        .map(|seed| Task {
            label: label.to_string(),
            config: config.clone(),
            seed,
        })
        .collect()
}

/// Runs every task on a pool of `jobs` workers. Results come back in task
/// order whatever the completion order, and each worker owns its own
/// environment, buffer and learner, so output does not depend on `jobs`.
pub fn run_tasks(tasks: &[Task], jobs: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|t| run_seed(&t.config, t.seed, &t.label))
            .collect()
    })
}
