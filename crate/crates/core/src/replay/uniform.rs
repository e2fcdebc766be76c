use rand::Rng;

use super::{ReplayError, SampleIndex, SampledBatch, Transition};
use crate::Scalar;

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBuffer<T> {
    capacity: usize,
    slots: Vec<Transition<T>>,
    stamps: Vec<u64>,
    cursor: usize,
    pushed: u64,
    state_dim: Option<usize>,
}

impl<T: Scalar> UniformBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            slots: Vec::with_capacity(capacity.min(1 << 16)),
            stamps: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
            pushed: 0,
            state_dim: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slot the next push writes to.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Total number of pushes since creation.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.state_dim
    }

    pub fn get(&self, slot: usize) -> Option<&Transition<T>> {
        self.slots.get(slot)
    }

    pub fn stamp(&self, slot: usize) -> Option<u64> {
        self.stamps.get(slot).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.slots.iter()
    }

    /// Stores a transition, overwriting the oldest one when full. Returns
    /// the slot written.
    pub fn push(&mut self, transition: Transition<T>) -> Result<usize, ReplayError> {
        let dim = transition.state.len();
        if transition.next_state.len() != dim {
            return Err(ReplayError::DimensionMismatch {
                expected: dim,
                actual: transition.next_state.len(),
            });
        }
        match self.state_dim {
            Some(expected) if expected != dim => {
                return Err(ReplayError::DimensionMismatch { expected, actual: dim })
            }
            _ => self.state_dim = Some(dim),
        }
        let slot = self.cursor;
        if slot == self.slots.len() {
            self.slots.push(transition);
            self.stamps.push(self.pushed);
        } else {
            self.slots[slot] = transition;
            self.stamps[slot] = self.pushed;
        }
        self.pushed += 1;
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(slot)
    }

    pub(crate) fn index(&self, slot: usize) -> SampleIndex {
        SampleIndex {
            slot,
            stamp: self.stamps[slot],
        }
    }

    /// Draws one slot uniformly; consumes exactly one `f64` from `rng`.
    pub(crate) fn draw_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        ((u * self.len() as f64) as usize).min(self.len() - 1)
    }

    /// `n` i.i.d. uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<SampledBatch<T>, ReplayError> {
        if self.len() < n || n == 0 {
            return Err(ReplayError::Underfilled {
                required: n.max(1),
                available: self.len(),
            });
        }
        let mut indices = Vec::with_capacity(n);
        let mut transitions = Vec::with_capacity(n);
        for _ in 0..n {
            let slot = self.draw_slot(rng);
            indices.push(self.index(slot));
            transitions.push(self.slots[slot].clone());
        }
        Ok(SampledBatch {
            indices,
            transitions,
            is_weights: vec![T::one(); n],
        })
    }

    pub(crate) fn restore(
        capacity: usize,
        slots: Vec<Transition<T>>,
        stamps: Vec<u64>,
        cursor: usize,
        pushed: u64,
    ) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        if slots.len() > capacity || stamps.len() != slots.len() || cursor >= capacity {
            return Err(ReplayError::Snapshot("inconsistent ring layout".into()));
        }
        let state_dim = slots.first().map(|t| t.state.len());
        Ok(Self {
            capacity,
            slots,
            stamps,
            cursor,
            pushed,
            state_dim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(tag: f64) -> Transition<f64> {
        Transition::new(vec![tag], 0, tag, vec![tag + 1.0], false)
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = UniformBuffer::new(2).unwrap();
        for i in 1..=3 {
            buf.push(t(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 2);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert!(!rewards.contains(&1.0));
        assert_eq!(buf.get(0).unwrap().reward, 3.0);
        assert_eq!(buf.stamp(0), Some(2));
    }

    #[test]
    fn single_item_sample() {
        let mut buf = UniformBuffer::new(4).unwrap();
        buf.push(t(7.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = buf.sample(1, &mut rng).unwrap();
        assert_eq!(b.transitions[0], t(7.0));
        assert_eq!(b.is_weights, vec![1.0]);
    }

    #[test]
    fn underfilled_reports_counts() {
        let mut buf = UniformBuffer::new(4).unwrap();
        buf.push(t(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match buf.sample(3, &mut rng) {
            Err(ReplayError::Underfilled { required, available }) => {
                assert_eq!((required, available), (3, 1))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn same_seed_same_indices() {
        let mut buf = UniformBuffer::new(16).unwrap();
        for i in 0..16 {
            buf.push(t(i as f64)).unwrap();
        }
        let a = buf.sample(16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = buf.sample(16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut buf = UniformBuffer::new(4).unwrap();
        buf.push(t(1.0)).unwrap();
        let bad = Transition::new(vec![0.0, 1.0], 0, 0.0, vec![0.0, 1.0], false);
        assert!(matches!(buf.push(bad), Err(ReplayError::DimensionMismatch { .. })));
        assert!(UniformBuffer::<f64>::new(0).is_err());
    }
}
