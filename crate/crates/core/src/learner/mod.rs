//! TD learners that consume replay batches and per-sample loss weights.
//!
//! Both learners minimise `(1/N) Σ (ω_j δ_j)²` with `ω` held constant, where
//! `δ_j = r_j + γ·max_a Q'(s'_j, a)·(1 − terminal_j) − Q(s_j, a_j)`.

mod checkpoint;
mod mlp;
mod optim;
mod policy;
mod tabular;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelError;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use mlp::{DqnConfig, DqnLearner, MlpQNetwork, StepReport, TdPass};
pub use optim::{Optimizer, OptimizerConfig};
pub use policy::{act_epsilon_greedy, greedy_action, ActionValues, EpsilonSchedule};
pub use tabular::QTable;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("input dimension {actual} does not match expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("state index {0} out of range")]
    InvalidState(usize),
    #[error("weight count {actual} does not match batch size {expected}")]
    WeightMismatch { expected: usize, actual: usize },
    #[error("non-finite gradient at parameter {index}; step rejected")]
    NonFiniteGradient { index: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the per-sample weight enters `∂L/∂δ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientForm {
    /// `2 δ_j ω_j² / N`, the derivative of `(1/N) Σ (ω_j δ_j)²`.
    #[default]
    Exact,
    /// `2 δ_j ω_j / N`, ω entering to the first power.
    Linear,
}

impl GradientForm {
    /// `∂L/∂δ_j` for one sample.
    #[inline]
    pub fn loss_slope<T: crate::Scalar>(self, delta: T, weight: T, n: T) -> T {
        match self {
            GradientForm::Exact => T::two() * delta * weight * weight / n,
            GradientForm::Linear => T::two() * delta * weight / n,
        }
    }
}
