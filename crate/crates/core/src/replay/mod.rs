//! Replay memories: a uniform ring buffer and a proportional prioritized
//! buffer backed by a sum-tree, plus the multiplier composition used when
//! prioritized sampling and loss weighting are combined.

mod compose;
mod prioritized;
pub mod snapshot;
mod sum_tree;
mod transition;
mod uniform;

use thiserror::Error;

pub use compose::{compose_per_pbwl, composed_loss};
pub use prioritized::{PerConfig, PrioritizedBuffer};
pub use sum_tree::SumTree;
pub use transition::Transition;
pub use uniform::UniformBuffer;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("buffer holds {available} transitions, {required} required")]
    Underfilled { required: usize, available: usize },
    #[error("total priority is zero")]
    ZeroPriority,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("slot {slot} out of range for {len} stored transitions")]
    InvalidSlot { slot: usize, len: usize },
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("state dimension {actual} does not match buffer dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Position of a sampled transition, stamped with the write that produced it
/// so later priority updates can detect that the slot was overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleIndex {
    pub slot: usize,
    pub stamp: u64,
}

/// A sampled mini-batch. `is_weights` is all ones for uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch<T> {
    pub indices: Vec<SampleIndex>,
    pub transitions: Vec<Transition<T>>,
    pub is_weights: Vec<T>,
}

impl<T> SampledBatch<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn slots(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i.slot).collect()
    }
}
