//! Desk-scale environments: a deterministic chain MDP with an exact
//! value-iteration oracle, and MountainCar with shaped rewards.

mod chain;
mod mountain_car;

use thiserror::Error;

pub use chain::{value_iteration_oracle, ChainMdp};
pub use mountain_car::{normalized_energy, ShapedMountainCar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("unknown environment id {0:?}; expected \"chain-N\" or \"mountaincar-shaped\"")]
    UnknownId(String),
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    /// True terminal state: the TD target does not bootstrap past it.
    pub terminal: bool,
    /// Episode cut by the step cap.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Input width the learner sees after [`Environment::features`].
    fn feature_dim(&self) -> usize {
        self.obs_dim()
    }
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<Step, EnvError>;
    /// Fixed encoding of an observation for function approximators.
    fn features(&self, obs: &[f64]) -> Vec<f64> {
        obs.to_vec()
    }
    fn max_steps(&self) -> usize;
}

/// Builds an environment from its id: `chain-N` or `mountaincar-shaped`.
pub fn make_env(id: &str) -> Result<Box<dyn Environment>, EnvError> {
    if id == "mountaincar-shaped" {
        return Ok(Box::new(ShapedMountainCar::new()));
    }
    if let Some(n) = id.strip_prefix("chain-") {
        if let Ok(n) = n.parse::<usize>() {
            if n >= 2 {
                return Ok(Box::new(ChainMdp::chain(n, 0.95)));
            }
        }
    }
    Err(EnvError::UnknownId(id.to_string()))
}
