use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvError, Environment, Step};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const EPISODE_CAP: usize = 200;

pub const STEP_REWARD: f64 = -2.0;
pub const GOAL_BONUS: f64 = 100.0;

/// Mechanical energy scaled to `[0, 1]` over the state box.
///
/// Potential energy follows the hill height `sin(3x)` mapped to `[0, 1]`;
/// kinetic energy is `v²/v_max²`. The two are averaged.
pub fn normalized_energy(position: f64, velocity: f64) -> f64 {
    let potential = ((3.0 * position).sin() + 1.0) / 2.0;
    let kinetic = (velocity / MAX_SPEED).powi(2);
    0.5 * (potential + kinetic)
}

/// MountainCar with the shaped reward `−2 + 100·[goal] + E_norm(s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedMountainCar {
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
}

impl Default for ShapedMountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl ShapedMountainCar {
    pub fn new() -> Self {
        Self {
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            done: false,
        }
    }

    /// Starts an episode from an explicit state.
    pub fn at(position: f64, velocity: f64) -> Self {
        Self {
            position: position.clamp(MIN_POSITION, MAX_POSITION),
            velocity: velocity.clamp(-MAX_SPEED, MAX_SPEED),
            steps: 0,
            done: false,
        }
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// Pure dynamics: `(x, v, action) → (x', v')`.
    pub fn transition(position: f64, velocity: f64, action: usize) -> (f64, f64) {
        let mut v = velocity + (action as f64 - 1.0) * FORCE - (3.0 * position).cos() * GRAVITY;
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let x = (position + v).clamp(MIN_POSITION, MAX_POSITION);
        if x == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (x, v)
    }
}

impl Environment for ShapedMountainCar {
    fn obs_dim(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        3
    }

    /// Position uniform in `[−0.6, −0.4]`, zero velocity.
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.position = rng.random_range(-0.6..=-0.4);
        self.velocity = 0.0;
        self.steps = 0;
        self.done = false;
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= 3 {
            return Err(EnvError::InvalidAction { action, n_actions: 3 });
        }
        let (x, v) = Self::transition(self.position, self.velocity, action);
        self.position = x;
        self.velocity = v;
        self.steps += 1;
        let terminal = x >= GOAL_POSITION;
        let truncated = !terminal && self.steps >= EPISODE_CAP;
        self.done = terminal || truncated;
        let bonus = if terminal { GOAL_BONUS } else { 0.0 };
        Ok(Step {
            state: vec![x, v],
            reward: STEP_REWARD + bonus + normalized_energy(x, v),
            terminal,
            truncated,
        })
    }

    /// Affine map of the state box onto `[−1, 1]²`.
    fn features(&self, obs: &[f64]) -> Vec<f64> {
        let mid = 0.5 * (MIN_POSITION + MAX_POSITION);
        let half = 0.5 * (MAX_POSITION - MIN_POSITION);
        vec![(obs[0] - mid) / half, obs[1] / MAX_SPEED]
    }

    fn max_steps(&self) -> usize {
        EPISODE_CAP
    }
}
