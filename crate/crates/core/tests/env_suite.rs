use pbwl::envs::{make_env, normalized_energy, value_iteration_oracle, ChainMdp, Environment, ShapedMountainCar};

#[test]
fn chain_oracle_matches_closed_form() {
    // Reward 1 for entering the right end, so V*(s) = γ^(n−2−s).
    let (n, gamma) = (10usize, 0.95f64);
    let q = value_iteration_oracle(&ChainMdp::chain(n, gamma), 1e-12);
    for s in 0..n - 1 {
        let right = gamma.powi((n - 2 - s) as i32);
        let left = gamma * gamma.powi((n - 2 - s.saturating_sub(1)) as i32);
        assert!((q[s][1] - right).abs() < 1e-10, "state {s}");
        assert!((q[s][0] - left).abs() < 1e-10, "state {s}");
    }
    assert_eq!(q[n - 1], [0.0, 0.0]);
}

#[test]
fn mountain_car_replays_from_a_seed() {
    let actions: Vec<usize> = (0..200).map(|i| (i * 7 + i / 13) % 3).collect();
    let rollout = |seed| {
        let mut env = make_env("mountaincar-shaped").unwrap();
        let mut out = vec![env.reset(seed)];
        for &a in &actions {
            let step = env.step(a).unwrap();
            out.push(step.state.clone());
            out.push(vec![step.reward]);
            if step.done() {
                break;
            }
        }
        out
    };
    assert_eq!(rollout(17), rollout(17));
    assert_ne!(rollout(17), rollout(18));
}

#[test]
fn resets_cover_the_start_interval() {
    let mut env = ShapedMountainCar::new();
    let xs: Vec<f64> = (0..500).map(|s| env.reset(s)[0]).collect();
    assert!(xs.iter().all(|x| (-0.6..=-0.4).contains(x)));
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo < -0.59 && hi > -0.41);
}

#[test]
fn reward_decomposes_into_step_cost_goal_and_energy() {
    let mut env = ShapedMountainCar::at(0.49, 0.07);
    let step = env.step(2).unwrap();
    assert!(step.terminal && !step.truncated);
    let (x, v) = (step.state[0], step.state[1]);
    assert_eq!(step.reward, -2.0 + 100.0 + normalized_energy(x, v));

    let mut env = ShapedMountainCar::at(-0.5, 0.0);
    let step = env.step(1).unwrap();
    assert!(!step.terminal);
    assert_eq!(step.reward, -2.0 + normalized_energy(step.state[0], step.state[1]));
}

#[test]
fn energy_is_normalized() {
    assert_eq!(normalized_energy(-std::f64::consts::PI / 6.0, 0.0), 0.0);
    assert!((normalized_energy(std::f64::consts::PI / 6.0, 0.07) - 1.0).abs() < 1e-15);
}
