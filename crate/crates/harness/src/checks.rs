//! Replay and learner checks shared by the acceptance run.

use pbwl::envs::{value_iteration_oracle, ChainMdp, Environment};
use pbwl::learner::{act_epsilon_greedy, DqnConfig, DqnLearner, GradientForm, MlpQNetwork, OptimizerConfig, QTable};
use pbwl::replay::{PerConfig, PrioritizedBuffer, SumTree, Transition, UniformBuffer};
use pbwl::{compute_weights, KernelConfig};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::experiment::stream_rng;

/// Outcome of one named check with a short measurement note.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn marker(i: usize) -> Transition<f64> {
    Transition::new(vec![i as f64], 0, 0.0, vec![i as f64], false)
}

/// 1e4 mixed pushes and updates against a brute-force leaf array.
pub fn sum_tree_consistency(seed: u64) -> Check {
    let mut rng = stream_rng(seed, 10);
    let capacity = 1000;
    let mut tree = SumTree::<f64>::new(capacity);
    let mut leaves = vec![0.0; capacity];
    let mut worst: f64 = 0.0;
    let mut filled = 0;
    for op in 0..10_000usize {
        let slot = if rng.random_bool(0.5) || filled == 0 {
            filled = filled.max(op % capacity + 1);
            op % capacity
        } else {
            rng.random_range(0..filled)
        };
        let p = 10f64.powf(rng.random_range(-6.0..2.0));
        tree.set(slot, p);
        leaves[slot] = p;
        if op % 100 == 99 {
            let brute: f64 = leaves.iter().sum();
            worst = worst
                .max((tree.total() - brute).abs() / brute)
                .max(tree.max_relative_inconsistency());
        }
    }
    check("sum-tree consistency", worst <= 1e-6, format!("max relative error {worst:.2e}"))
}

/// Empirical PER frequencies over 1e5 draws against `p^α / Σ p^α`.
pub fn per_chi_square(seed: u64) -> Check {
    let mut rng = stream_rng(seed, 11);
    let cfg = PerConfig::default();
    let mut min_p = 1.0f64;
    for _ in 0..20 {
        let len = rng.random_range(2..=64);
        let mut buf = PrioritizedBuffer::<f64>::new(len).expect("capacity");
        let mut leaves = Vec::with_capacity(len);
        for i in 0..len {
            buf.push(marker(i)).expect("push");
            let leaf = cfg.priority(rng.random_range(0.01..5.0));
            buf.set_priority(i, leaf).expect("slot");
            leaves.push(leaf);
        }
        let rounds = 100_000usize.div_ceil(len);
        let mut counts = vec![0usize; len];
        for _ in 0..rounds {
            for s in buf.sample(len, 0.4, &cfg, &mut rng).expect("sample").slots() {
                counts[s] += 1;
            }
        }
        let draws = (rounds * len) as f64;
        let total: f64 = leaves.iter().sum();
        let stat: f64 = counts
            .iter()
            .zip(&leaves)
            .map(|(&c, &l)| {
                let e = draws * l / total;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new((len - 1) as f64).expect("dof").cdf(stat);
        min_p = min_p.min(p);
    }
    check("PER chi-square", min_p > 0.001, format!("smallest p-value {min_p:.4} over 20 vectors"))
}

/// Leaves 1 and 3 at β = 1 give max-normalized weights 1 and 1/3.
pub fn beta_one_two_leaf(seed: u64) -> Check {
    let mut buf = PrioritizedBuffer::<f64>::new(2).expect("capacity");
    buf.push(marker(0)).expect("push");
    buf.push(marker(1)).expect("push");
    buf.set_priority(0, 1.0).expect("slot");
    buf.set_priority(1, 3.0).expect("slot");
    let mut rng = stream_rng(seed, 12);
    let mut exact = None;
    for _ in 0..50 {
        let b = buf.sample(2, 1.0, &PerConfig::default(), &mut rng).expect("sample");
        if b.slots() == [0, 1] {
            exact = Some(b.is_weights == [1.0, 1.0 / 3.0]);
            break;
        }
    }
    check(
        "beta=1 two-leaf weights",
        exact == Some(true),
        "weights (1, 1/3) for leaves (1, 3)".into(),
    )
}

/// Central differences against the analytic gradient on small networks.
pub fn finite_difference_gradients(seed: u64) -> Check {
    let mut rng = stream_rng(seed, 13);
    let (h, gamma) = (1e-5, 0.9);
    let mut worst: f64 = 0.0;
    for instance in 0..100 {
        let dim = rng.random_range(1..=4);
        let actions = rng.random_range(2..=3);
        let sizes = if instance % 2 == 0 { vec![dim, 2, actions] } else { vec![dim, 2, 2, actions] };
        let mut net = MlpQNetwork::<f64>::new(&sizes, &mut rng);
        for p in net.params_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let n = rng.random_range(1..=8);
        let batch: Vec<Transition<f64>> = (0..n)
            .map(|_| {
                let s = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s2 = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                Transition::new(s, rng.random_range(0..actions), rng.random_range(-2.0..2.0), s2, rng.random_bool(0.2))
            })
            .collect();
        let pass = net.forward_td(&batch, gamma).expect("forward");
        let weights = compute_weights(pass.td_errors(), &KernelConfig::default()).expect("kernel").omegas;
        let (_, grads) = net.gradient(&pass, &weights, GradientForm::Exact).expect("gradient");
        for k in 0..net.param_count() {
            let base = net.params()[k];
            net.params_mut()[k] = base + h;
            let up = net.weighted_loss(&batch, &weights, gamma).expect("loss");
            net.params_mut()[k] = base - h;
            let down = net.weighted_loss(&batch, &weights, gamma).expect("loss");
            net.params_mut()[k] = base;
            let fd = (up - down) / (2.0 * h);
            let scale = grads[k].abs().max(fd.abs());
            if scale >= 1e-7 {
                worst = worst.max((grads[k] - fd).abs() / scale);
            }
        }
    }
    check("finite-difference gradients", worst < 1e-4, format!("max relative error {worst:.2e}"))
}

/// Weighted steps with ω ≡ 1 against the unweighted reference, bit for bit.
pub fn unit_weight_step(seed: u64) -> Check {
    let mut rng = stream_rng(seed, 14);
    let cfg = DqnConfig {
        hidden: vec![32, 32],
        optimizer: OptimizerConfig::adam(1e-3),
        target_sync: 5,
        ..DqnConfig::default()
    };
    let mut a = DqnLearner::<f64>::new(&cfg, 2, 3, &mut rng);
    let mut b = a.clone();
    for _ in 0..20 {
        let batch: Vec<Transition<f64>> = (0..64)
            .map(|_| {
                Transition::new(
                    vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    rng.random_range(0..3),
                    rng.random_range(-2.0..2.0),
                    vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    rng.random_bool(0.1),
                )
            })
            .collect();
        a.train_step(&batch, &[1.0; 64]).expect("step");
        b.mse_step(&batch).expect("step");
    }
    let same = a.network().params() == b.network().params();
    check("unit weights match unweighted step", same, "20 Adam steps, bitwise".into())
}

/// Off-policy tabular Q-learning on the 10-state chain with ω ≡ 1.
pub fn tabular_chain(seed: u64) -> Check {
    let gamma = 0.95;
    let mut env = ChainMdp::chain(10, gamma);
    let oracle = value_iteration_oracle(&env, 1e-9);
    let mut table = QTable::<f64>::new(10, 2, gamma);
    let mut buffer = UniformBuffer::<f64>::new(10_000).expect("capacity");
    let mut rng = stream_rng(seed, 15);
    let mut state = env.reset(0);
    let mut reached = None;
    for step in 0..200_000u64 {
        let action = act_epsilon_greedy(&table, &state, 1.0, &mut rng);
        let out = env.step(action).expect("step");
        buffer
            .push(Transition::new(state.clone(), action, out.reward, out.state.clone(), out.terminal))
            .expect("push");
        state = if out.done() { env.reset(step) } else { out.state };
        if buffer.len() >= 32 {
            let batch = buffer.sample(32, &mut rng).expect("sample");
            let lr = 0.5 / (1.0 + step as f64 / 100_000.0);
            table.train_step(&batch.transitions, &[1.0; 32], lr).expect("train");
        }
        if step % 1000 == 999 && table.sup_distance(&oracle) < 1e-3 {
            reached = Some(step + 1);
            break;
        }
    }
    check(
        "tabular chain vs value iteration",
        reached.is_some(),
        match reached {
            Some(s) => format!("sup error < 1e-3 after {s} steps"),
            None => format!("sup error {:.2e} after 2e5 steps", table.sup_distance(&oracle)),
        },
    )
}

pub fn replay_checks(seed: u64) -> Vec<Check> {
    vec![sum_tree_consistency(seed), per_chi_square(seed), beta_one_two_leaf(seed)]
}

pub fn learner_checks(seed: u64) -> Vec<Check> {
    vec![finite_difference_gradients(seed), unit_weight_step(seed), tabular_chain(seed)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_and_learner_checks_pass() {
        for c in replay_checks(1).into_iter().chain(learner_checks(1)) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
