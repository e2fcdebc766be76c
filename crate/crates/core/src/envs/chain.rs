use super::{EnvError, Environment, Step};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Deterministic line of states with `left`/`right` moves.
///
/// Moves clamp at both ends. Entering the terminal state (if any) ends the
/// episode; its own action values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMdp {
    n_states: usize,
    gamma: f64,
    /// `rewards[s][a]` for taking `a` in `s`.
    rewards: Vec<[f64; 2]>,
    terminal: Option<usize>,
    max_steps: usize,
    state: usize,
    steps: usize,
    done: bool,
}

impl ChainMdp {
    pub fn new(gamma: f64, rewards: Vec<[f64; 2]>, terminal: Option<usize>) -> Self {
        assert!(!rewards.is_empty(), "chain needs at least one state");
        assert!(gamma > 0.0 && gamma < 1.0, "discount must lie in (0, 1)");
        let n_states = rewards.len();
        assert!(terminal.is_none_or(|t| t < n_states));
        Self {
            n_states,
            gamma,
            rewards,
            terminal,
            max_steps: 20 * n_states.max(5),
            state: 0,
            steps: 0,
            done: false,
        }
    }

    /// `n` states, terminal at the right end, reward 1 for stepping into it.
    pub fn chain(n: usize, gamma: f64) -> Self {
        assert!(n >= 2);
        let mut rewards = vec![[0.0, 0.0]; n];
        rewards[n - 2][RIGHT] = 1.0;
        Self::new(gamma, rewards, Some(n - 1))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn terminal(&self) -> Option<usize> {
        self.terminal
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state][action]
    }

    pub fn next_state(&self, state: usize, action: usize) -> usize {
        match action {
            LEFT => state.saturating_sub(1),
            _ => (state + 1).min(self.n_states - 1),
        }
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal == Some(state)
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl Environment for ChainMdp {
    fn obs_dim(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        self.n_states
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.state = 0;
        self.steps = 0;
        self.done = false;
        vec![0.0]
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= 2 {
            return Err(EnvError::InvalidAction { action, n_actions: 2 });
        }
        let reward = self.reward(self.state, action);
        self.state = self.next_state(self.state, action);
        self.steps += 1;
        let terminal = self.is_terminal(self.state);
        let truncated = !terminal && self.steps >= self.max_steps;
        self.done = terminal || truncated;
        Ok(Step {
            state: vec![self.state as f64],
            reward,
            terminal,
            truncated,
        })
    }

    /// One-hot state encoding.
    fn features(&self, obs: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_states];
        f[obs[0] as usize] = 1.0;
        f
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }
}

/// Bellman-optimal action values by synchronous value iteration.
///
/// Stops once successive iterates differ by less than `tol·(1−γ)/γ` in the
/// sup norm, which bounds the distance to the fixed point by `tol`.
pub fn value_iteration_oracle(mdp: &ChainMdp, tol: f64) -> Vec<[f64; 2]> {
    let gamma = mdp.gamma();
    let threshold = tol * (1.0 - gamma) / gamma;
    let mut q = vec![[0.0f64; 2]; mdp.n_states()];
    loop {
        let mut next = vec![[0.0f64; 2]; mdp.n_states()];
        for s in 0..mdp.n_states() {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in [LEFT, RIGHT] {
                let s2 = mdp.next_state(s, a);
                let bootstrap = if mdp.is_terminal(s2) {
                    0.0
                } else {
                    q[s2][0].max(q[s2][1])
                };
                next[s][a] = mdp.reward(s, a) + gamma * bootstrap;
            }
        }
        let diff = q
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
            .fold(0.0, f64::max);
        q = next;
        if diff < threshold {
            return q;
        }
    }
}
