use rand::Rng;

use crate::Scalar;

/// Anything that scores every action for a state.
pub trait ActionValues<T> {
    fn n_actions(&self) -> usize;
    fn action_values(&self, state: &[T]) -> Vec<T>;
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_action<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `epsilon`, greedy otherwise.
///
/// Always consumes one `f64` draw, plus one more when exploring.
pub fn act_epsilon_greedy<T: Scalar, Q: ActionValues<T> + ?Sized, R: Rng + ?Sized>(
    learner: &Q,
    state: &[T],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        rng.random_range(0..learner.n_actions())
    } else {
        greedy_action(&learner.action_values(state))
    }
}

/// Linear decay from `start` to `end` over the first `decay_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    /// 1.0 → 0.05 over the first 20% of `total_steps`.
    pub fn standard(total_steps: u64) -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_steps: (total_steps / 5).max(1),
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + frac * (self.end - self.start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixed(Vec<f64>);

    impl ActionValues<f64> for Fixed {
        fn n_actions(&self) -> usize {
            self.0.len()
        }
        fn action_values(&self, _: &[f64]) -> Vec<f64> {
            self.0.clone()
        }
    }

    #[test]
    fn zero_epsilon_is_greedy() {
        let q = Fixed(vec![0.1, 0.7, -3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(act_epsilon_greedy(&q, &[], 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn ties_take_lowest_index() {
        assert_eq!(greedy_action(&[1.0, 2.0, 2.0]), 1);
        assert_eq!(greedy_action(&[0.0f32; 4]), 0);
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let q = Fixed(vec![0.0, 5.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[act_epsilon_greedy(&q, &[], 1.0, &mut rng)] += 1;
        }
        // Binomial(n, 1/4): 4σ band.
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn same_seed_same_actions() {
        let q = Fixed(vec![0.0, 1.0, 0.5]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| act_epsilon_greedy(&q, &[], 0.3, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(8), run(8));
    }

    #[test]
    fn schedule_is_linear_then_flat() {
        let s = EpsilonSchedule::standard(1000);
        assert_eq!(s.decay_steps, 200);
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(100) - 0.525).abs() < 1e-12);
        assert_eq!(s.at(200), 0.05);
        assert_eq!(s.at(10_000), 0.05);
    }
}
