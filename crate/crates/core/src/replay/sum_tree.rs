use crate::Scalar;

/// Complete binary tree over `capacity` leaves (rounded up to a power of two)
/// holding subtree sums, with a parallel tree of subtree maxima.
///
/// Updates recompute each ancestor from its two children, so every internal
/// node is always the floating-point sum of its children and no drift
/// accumulates.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTree<T> {
    capacity: usize,
    leaves: usize,
    sums: Vec<T>,
    maxes: Vec<T>,
}

impl<T: Scalar> SumTree<T> {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            capacity,
            leaves,
            sums: vec![T::zero(); 2 * leaves - 1],
            maxes: vec![T::zero(); 2 * leaves - 1],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> T {
        self.sums[0]
    }

    /// Largest leaf priority, zero when every leaf is zero.
    pub fn max_leaf(&self) -> T {
        self.maxes[0]
    }

    pub fn get(&self, leaf: usize) -> T {
        self.sums[leaf + self.leaves - 1]
    }

    /// Raw node array, root first.
    pub fn nodes(&self) -> &[T] {
        &self.sums
    }

    pub fn set(&mut self, leaf: usize, priority: T) {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        debug_assert!(priority >= T::zero() && priority.is_finite());
        let mut node = leaf + self.leaves - 1;
        self.sums[node] = priority;
        self.maxes[node] = priority;
        while node > 0 {
            node = (node - 1) / 2;
            let (l, r) = (2 * node + 1, 2 * node + 2);
            self.sums[node] = self.sums[l] + self.sums[r];
            self.maxes[node] = self.maxes[l].max(self.maxes[r]);
        }
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for node in (0..self.leaves - 1).rev() {
            let (l, r) = (2 * node + 1, 2 * node + 2);
            self.sums[node] = self.sums[l] + self.sums[r];
            self.maxes[node] = self.maxes[l].max(self.maxes[r]);
        }
    }

    /// Leaf whose cumulative interval `[prefix, prefix + p)` contains `mass`.
    ///
    /// Zero-priority leaves are never returned while the total is positive; a
    /// mass at or past the total (rounding) resolves to the last positive leaf.
    pub fn find(&self, mass: T) -> usize {
        let mut node = 0;
        let mut mass = mass.max(T::zero());
        while node < self.leaves - 1 {
            let left = 2 * node + 1;
            if mass < self.sums[left] {
                node = left;
            } else {
                mass = mass - self.sums[left];
                node = left + 1;
            }
        }
        let mut leaf = node + 1 - self.leaves;
        if leaf >= self.capacity || self.get(leaf) == T::zero() {
            leaf = (0..self.capacity.min(leaf + 1))
                .rev()
                .find(|&i| self.get(i) > T::zero())
                .unwrap_or(0);
        }
        leaf
    }

    /// Largest relative deviation between an internal node and the sum of
    /// its children.
    pub fn max_relative_inconsistency(&self) -> f64 {
        (0..self.leaves - 1)
            .map(|node| {
                let expect = (self.sums[2 * node + 1] + self.sums[2 * node + 2]).as_f64();
                let got = self.sums[node].as_f64();
                (got - expect).abs() / expect.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_and_find() {
        let mut tree = SumTree::new(8);
        assert_eq!(tree.nodes().len(), 15);
        for i in 0..8 {
            tree.set(i, i as f64);
        }
        assert_eq!(tree.total(), 28.0);
        assert_eq!(tree.max_leaf(), 7.0);
        // prefix sums: 0,0,1,3,6,10,15,21,28
        assert_eq!(tree.find(0.0), 1);
        assert_eq!(tree.find(4.0), 3);
        assert_eq!(tree.find(18.0), 6);
        assert_eq!(tree.find(27.999), 7);
        assert_eq!(tree.find(28.0), 7);
    }

    #[test]
    fn update_changes_root_by_difference() {
        let mut tree = SumTree::new(5);
        for i in 0..5 {
            tree.set(i, 1.0 + i as f64);
        }
        let before = tree.total();
        let old = tree.get(3);
        tree.set(3, 10.0);
        assert_eq!(tree.total() - before, 10.0 - old);
    }

    #[test]
    fn non_power_of_two_capacity_skips_padding() {
        let mut tree = SumTree::new(3);
        for i in 0..3 {
            tree.set(i, 1.0);
        }
        assert_eq!(tree.find(2.5), 2);
        assert_eq!(tree.find(3.0), 2);
        assert_eq!(tree.find(10.0), 2);
    }

    #[test]
    fn max_tracks_decreases() {
        let mut tree = SumTree::new(4);
        tree.set(0, 5.0f32);
        tree.set(1, 2.0);
        tree.set(0, 1.0);
        assert_eq!(tree.max_leaf(), 2.0);
        tree.rebuild();
        assert_eq!(tree.max_relative_inconsistency(), 0.0);
    }
}
