//! Prioritization-based weighted loss (PBWL) for off-policy TD learning.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the common instantiations.

pub mod envs;
pub mod kernel;
pub mod learner;
pub mod replay;
mod scalar;

pub use kernel::{
    compute_weights, weighted_loss, CompensationNorm, KernelConfig, KernelError, Normalization,
    TdErrorBatch, WeightVector,
};
pub use scalar::Scalar;

pub type TdErrorBatch64 = kernel::TdErrorBatch<f64>;
pub type TdErrorBatch32 = kernel::TdErrorBatch<f32>;
pub type WeightVector64 = kernel::WeightVector<f64>;
pub type WeightVector32 = kernel::WeightVector<f32>;
