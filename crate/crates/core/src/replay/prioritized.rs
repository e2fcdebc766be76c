use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ReplayError, SampleIndex, SampledBatch, SumTree, Transition, UniformBuffer};
use crate::Scalar;

/// Proportional prioritization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerConfig {
    /// Priority exponent α.
    pub alpha: f64,
    /// β at the start of training.
    pub beta_start: f64,
    /// β after `anneal_steps`.
    pub beta_end: f64,
    pub anneal_steps: u64,
    /// Added to `|δ|` so no transition has zero probability.
    pub epsilon: f64,
    /// One draw per equal-mass segment instead of independent draws.
    pub stratified: bool,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            anneal_steps: 100_000,
            epsilon: 1e-6,
            stratified: true,
        }
    }
}

impl PerConfig {
    /// Linearly annealed β after `step` training steps.
    pub fn beta_at(&self, step: u64) -> f64 {
        if self.anneal_steps == 0 || step >= self.anneal_steps {
            return self.beta_end;
        }
        let frac = step as f64 / self.anneal_steps as f64;
        self.beta_start + frac * (self.beta_end - self.beta_start)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be >= 0, got {}", self.alpha));
        }
        for (name, b) in [("beta_start", self.beta_start), ("beta_end", self.beta_end)] {
            if !(0.0..=1.0).contains(&b) {
                return Err(format!("{name} must lie in [0, 1], got {b}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Stored leaf value `(|δ| + ε)^α`.
    pub fn priority<T: Scalar>(&self, td_error: T) -> T {
        (td_error.abs() + T::lit(self.epsilon)).powf(T::lit(self.alpha))
    }
}

/// Ring buffer whose slots are sampled in proportion to their stored
/// priority. Leaves hold `p^α`, so `P(i) = leaf_i / total`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedBuffer<T> {
    storage: UniformBuffer<T>,
    tree: SumTree<T>,
    stale_updates: u64,
}

impl<T: Scalar> PrioritizedBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self, ReplayError> {
        Ok(Self {
            storage: UniformBuffer::new(capacity)?,
            tree: SumTree::new(capacity),
            stale_updates: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.storage.capacity()
    }

    pub fn storage(&self) -> &UniformBuffer<T> {
        &self.storage
    }

    pub fn tree(&self) -> &SumTree<T> {
        &self.tree
    }

    /// Priority updates skipped because the slot had been overwritten.
    pub fn stale_updates(&self) -> u64 {
        self.stale_updates
    }

    pub fn priority(&self, slot: usize) -> T {
        self.tree.get(slot)
    }

    /// Stores a transition at the current maximum leaf priority (1 when empty).
    pub fn push(&mut self, transition: Transition<T>) -> Result<usize, ReplayError> {
        let priority = if self.storage.is_empty() || self.tree.max_leaf() <= T::zero() {
            T::one()
        } else {
            self.tree.max_leaf()
        };
        let slot = self.storage.push(transition)?;
        self.tree.set(slot, priority);
        Ok(slot)
    }

    /// Sets a stored leaf value directly (already exponentiated).
    pub fn set_priority(&mut self, slot: usize, leaf_value: T) -> Result<(), ReplayError> {
        if slot >= self.len() {
            return Err(ReplayError::InvalidSlot { slot, len: self.len() });
        }
        self.tree.set(slot, leaf_value);
        Ok(())
    }

    /// Proportional sampling with importance-sampling weights
    /// `(M·P(i))^(−β)`, normalized by the batch maximum.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        beta: f64,
        config: &PerConfig,
        rng: &mut R,
    ) -> Result<SampledBatch<T>, ReplayError> {
        if self.len() < n || n == 0 {
            return Err(ReplayError::Underfilled {
                required: n.max(1),
                available: self.len(),
            });
        }
        let total = self.tree.total();
        if !(total > T::zero()) {
            return Err(ReplayError::ZeroPriority);
        }
        let segment = total / T::from_usize_lossy(n);
        let mut indices = Vec::with_capacity(n);
        let mut transitions = Vec::with_capacity(n);
        let mut raw = Vec::with_capacity(n);
        let m = T::from_usize_lossy(self.len());
        let neg_beta = T::lit(-beta);
        for j in 0..n {
            let u = T::lit(rng.random::<f64>());
            let mass = if config.stratified {
                segment * (T::from_usize_lossy(j) + u)
            } else {
                u * total
            };
            let slot = self.tree.find(mass).min(self.len() - 1);
            let prob = self.tree.get(slot) / total;
            raw.push((m * prob).powf(neg_beta));
            indices.push(self.storage.index(slot));
            transitions.push(self.storage.get(slot).expect("occupied slot").clone());
        }
        let max = raw.iter().copied().fold(T::zero(), T::max);
        let is_weights = raw.into_iter().map(|w| w / max).collect();
        Ok(SampledBatch {
            indices,
            transitions,
            is_weights,
        })
    }

    /// Sets `leaf_i := (|δ_i| + ε)^α`. Indices whose slot was overwritten
    /// since sampling are skipped and counted.
    pub fn update_priorities(
        &mut self,
        indices: &[SampleIndex],
        td_errors: &[T],
        config: &PerConfig,
    ) -> Result<(), ReplayError> {
        if indices.len() != td_errors.len() {
            return Err(ReplayError::LengthMismatch {
                expected: indices.len(),
                actual: td_errors.len(),
            });
        }
        for (idx, &delta) in indices.iter().zip(td_errors) {
            match self.storage.stamp(idx.slot) {
                None => {
                    return Err(ReplayError::InvalidSlot {
                        slot: idx.slot,
                        len: self.len(),
                    })
                }
                Some(stamp) if stamp != idx.stamp => self.stale_updates += 1,
                Some(_) => self.tree.set(idx.slot, config.priority(delta)),
            }
        }
        Ok(())
    }

    pub(crate) fn restore(
        storage: UniformBuffer<T>,
        priorities: Vec<T>,
        stale_updates: u64,
    ) -> Result<Self, ReplayError> {
        if priorities.len() != storage.len() {
            return Err(ReplayError::Snapshot("priority count differs from length".into()));
        }
        let mut tree = SumTree::new(storage.capacity());
        for (slot, p) in priorities.into_iter().enumerate() {
            if !(p >= T::zero() && p.is_finite()) {
                return Err(ReplayError::Snapshot(format!("bad priority at slot {slot}")));
            }
            tree.set(slot, p);
        }
        Ok(Self {
            storage,
            tree,
            stale_updates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(tag: f64) -> Transition<f64> {
        Transition::new(vec![tag], 0, tag, vec![tag], false)
    }

    #[test]
    fn first_push_gets_unit_priority() {
        let mut buf = PrioritizedBuffer::new(4).unwrap();
        buf.push(t(0.0)).unwrap();
        assert_eq!(buf.priority(0), 1.0);
    }

    #[test]
    fn push_inherits_current_max_leaf() {
        let mut buf = PrioritizedBuffer::new(8).unwrap();
        for i in 0..4 {
            buf.push(t(i as f64)).unwrap();
        }
        for (slot, p) in [0.5, 2.5, 0.1, 1.7].into_iter().enumerate() {
            buf.set_priority(slot, p).unwrap();
        }
        let slot = buf.push(t(9.0)).unwrap();
        let scan = (0..4).map(|s| buf.priority(s)).fold(0.0, f64::max);
        assert_eq!(buf.priority(slot), scan);
        assert_eq!(scan, 2.5);
    }

    #[test]
    fn two_leaf_importance_weights() {
        let mut buf = PrioritizedBuffer::new(2).unwrap();
        buf.push(t(0.0)).unwrap();
        buf.push(t(1.0)).unwrap();
        buf.set_priority(0, 1.0).unwrap();
        buf.set_priority(1, 3.0).unwrap();
        let cfg = PerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [false; 2];
        for _ in 0..50 {
            let b = buf.sample(2, 1.0, &cfg, &mut rng).unwrap();
            for (idx, &w) in b.indices.iter().zip(&b.is_weights) {
                seen[idx.slot] = true;
                let other = b.indices.iter().any(|i| i.slot != idx.slot);
                match (idx.slot, other) {
                    (0, _) => assert_eq!(w, 1.0),
                    (1, true) => assert_eq!(w, 1.0 / 3.0),
                    (1, false) => assert_eq!(w, 1.0),
                    _ => unreachable!(),
                }
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn equal_priorities_give_unit_weights() {
        let mut buf = PrioritizedBuffer::new(10).unwrap();
        for i in 0..10 {
            buf.push(t(i as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = buf.sample(5, 0.7, &PerConfig::default(), &mut rng).unwrap();
        assert!(b.is_weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn priority_formula() {
        let cfg = PerConfig {
            alpha: 0.6,
            epsilon: 1e-6,
            ..PerConfig::default()
        };
        assert_eq!(cfg.priority(0.0f64), 1e-6f64.powf(0.6));
        assert_eq!(cfg.priority(-2.0f64), (2.0f64 + 1e-6).powf(0.6));
    }

    #[test]
    fn stale_updates_are_skipped_and_counted() {
        let mut buf = PrioritizedBuffer::new(2).unwrap();
        buf.push(t(0.0)).unwrap();
        buf.push(t(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = PerConfig::default();
        let b = buf.sample(2, 0.4, &cfg, &mut rng).unwrap();
        buf.push(t(2.0)).unwrap(); // overwrites slot 0
        let before = buf.priority(0);
        buf.update_priorities(&b.indices, &[5.0, 5.0], &cfg).unwrap();
        let stale = b.indices.iter().filter(|i| i.slot == 0).count() as u64;
        assert_eq!(buf.stale_updates(), stale);
        assert_eq!(buf.priority(0), before);
        let bad = [SampleIndex { slot: 7, stamp: 0 }];
        assert!(buf.update_priorities(&bad, &[1.0], &cfg).is_err());
    }

    #[test]
    fn beta_anneals_linearly() {
        let cfg = PerConfig {
            anneal_steps: 100,
            ..PerConfig::default()
        };
        assert_eq!(cfg.beta_at(0), 0.4);
        assert!((cfg.beta_at(50) - 0.7).abs() < 1e-15);
        assert_eq!(cfg.beta_at(100), 1.0);
        assert_eq!(cfg.beta_at(1_000), 1.0);
        assert!(PerConfig { epsilon: 0.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn zero_total_rejected() {
        let mut buf = PrioritizedBuffer::new(2).unwrap();
        buf.push(t(0.0)).unwrap();
        buf.set_priority(0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample(1, 0.4, &PerConfig::default(), &mut rng),
            Err(ReplayError::ZeroPriority)
        ));
    }
}
