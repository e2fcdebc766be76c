//! One seeded training run.

use std::time::{Duration, Instant};

use pbwl::envs::{make_env, Environment};
use pbwl::learner::{act_epsilon_greedy, greedy_action, ActionValues, DqnLearner, EpsilonSchedule, QTable};
use pbwl::replay::{compose_per_pbwl, PrioritizedBuffer, SampledBatch, Transition, UniformBuffer};
use pbwl::kernel::stats;
use pbwl::{compute_weights, TdErrorBatch};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{BufferKind, ExperimentConfig, LearnerKind};
use crate::error::{HarnessError, Result};
use crate::smoothing::{first_sustained_crossing, moving_average};

const STREAM_INIT: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_REPLAY: u64 = 3;
const STREAM_RESET: u64 = 4;
const STREAM_EVAL: u64 = 5;

/// Independent random stream `stream` of a run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One logged training batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTrace {
    pub train_step: u64,
    pub slots: Vec<usize>,
    pub td_errors: Vec<f64>,
    pub is_weights: Vec<f64>,
    pub omegas: Vec<f64>,
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Training episodes completed when the evaluation ran.
    pub episode: usize,
    pub success_rate: f64,
    pub mean_return: f64,
}

/// Output of one seeded run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub label: String,
    pub fingerprint: String,
    pub returns: Vec<f64>,
    pub smoothed_returns: Vec<f64>,
    pub successes: Vec<bool>,
    pub evals: Vec<EvalPoint>,
    pub smoothed_success: Vec<f64>,
    /// Episode count at the evaluation that starts the first sustained
    /// crossing of the success threshold; `None` means "not converge".
    pub convergence_episode: Option<usize>,
    pub env_steps: u64,
    pub train_steps: u64,
    pub rejected_steps: u64,
    pub stale_updates: u64,
    /// SHA-256 over every sampled slot index, in order.
    pub batch_digest: String,
    /// First training step whose batch had mean |δ| below median |δ|, the
    /// point where combined and median normalization part ways.
    pub first_mean_below_median: Option<u64>,
    #[serde(skip)]
    pub traces: Vec<BatchTrace>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunRecord {
    /// Smoothed success at the last evaluation within `fraction` of the
    /// episode budget (0 before the first evaluation).
    pub fn success_at(&self, fraction: f64, episodes: usize) -> f64 {
        let limit = (fraction * episodes as f64).round() as usize;
        self.evals
            .iter()
            .zip(&self.smoothed_success)
            .filter(|(e, _)| e.episode <= limit)
            .map(|(_, &s)| s)
            .last()
            .unwrap_or(0.0)
    }

    pub fn final_success(&self) -> f64 {
        self.smoothed_success.last().copied().unwrap_or(0.0)
    }
}

enum Agent {
    Dqn(DqnLearner<f64>),
    Tabular { table: QTable<f64>, lr: f64, decay: f64, steps: u64 },
}

impl Agent {
    fn q(&self) -> &dyn ActionValues<f64> {
        match self {
            Agent::Dqn(l) => l,
            Agent::Tabular { table, .. } => table,
        }
    }

    fn train_steps(&self) -> u64 {
        match self {
            Agent::Dqn(l) => l.train_steps(),
            Agent::Tabular { steps, .. } => *steps,
        }
    }
}

enum Memory {
    Uniform(UniformBuffer<f64>),
    Per(PrioritizedBuffer<f64>),
}

impl Memory {
    fn len(&self) -> usize {
        match self {
            Memory::Uniform(b) => b.len(),
            Memory::Per(b) => b.len(),
        }
    }

    fn push(&mut self, t: Transition<f64>) -> Result<()> {
        match self {
            Memory::Uniform(b) => b.push(t)?,
            Memory::Per(b) => b.push(t)?,
        };
        Ok(())
    }
}

/// Trains one agent for `config.episodes` episodes with `seed`.
///
/// Fully deterministic in `(config, seed)`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, label: &str) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let mut env = make_env(&config.env)?;
    let encode = |env: &dyn Environment, obs: &[f64]| -> Vec<f64> {
        match config.learner {
            LearnerKind::Dqn => env.features(obs),
            LearnerKind::Tabular => obs.to_vec(),
        }
    };

    let mut init_rng = stream_rng(seed, STREAM_INIT);
    let mut explore_rng = stream_rng(seed, STREAM_EXPLORE);
    let mut replay_rng = stream_rng(seed, STREAM_REPLAY);
    let mut reset_rng = stream_rng(seed, STREAM_RESET);
    let mut eval_rng = stream_rng(seed, STREAM_EVAL);
    let eval_seeds: Vec<u64> = (0..config.eval.episodes).map(|_| eval_rng.next_u64()).collect();

    let mut agent = match config.learner {
        LearnerKind::Dqn => Agent::Dqn(DqnLearner::new(
            &config.dqn,
            env.feature_dim(),
            env.n_actions(),
            &mut init_rng,
        )),
        LearnerKind::Tabular => {
            let n_states = env.feature_dim();
            Agent::Tabular {
                table: QTable::new(n_states, env.n_actions(), config.dqn.gamma),
                lr: config.tabular_lr,
                decay: config.tabular_lr_decay_steps,
                steps: 0,
            }
        }
    };
    let mut memory = match config.buffer {
        BufferKind::Uniform => Memory::Uniform(UniformBuffer::new(config.buffer_capacity)?),
        BufferKind::Per => Memory::Per(PrioritizedBuffer::new(config.buffer_capacity)?),
    };

    let budget = config.step_budget();
    let schedule = EpsilonSchedule {
        start: config.exploration.start,
        end: config.exploration.end,
        decay_steps: ((budget as f64 * config.exploration.decay_fraction) as u64).max(1),
    };
    let per_cfg = config.per;
    let mut digest = Sha256::new();
    let mut traces = Vec::new();
    let mut returns = Vec::with_capacity(config.episodes);
    let mut successes = Vec::with_capacity(config.episodes);
    let mut evals = Vec::new();
    let mut env_steps: u64 = 0;
    let mut rejected: u64 = 0;
    let mut first_mean_below_median = None;

    for episode in 0..config.episodes {
        let mut obs = env.reset(reset_rng.next_u64());
        let mut state = encode(env.as_ref(), &obs);
        let mut total = 0.0;
        let mut reached = false;
        loop {
            let action = act_epsilon_greedy(agent.q(), &state, schedule.at(env_steps), &mut explore_rng);
            let step = env.step(action)?;
            let next = encode(env.as_ref(), &step.state);
            total += step.reward;
            reached |= step.terminal;
            memory.push(Transition::new(state, action, step.reward, next.clone(), step.terminal))?;
            env_steps += 1;

            if memory.len() >= config.warmup.max(config.batch_size) && env_steps % config.train_every as u64 == 0 {
                let train_step = agent.train_steps();
                let batch = match &memory {
                    Memory::Uniform(b) => b.sample(config.batch_size, &mut replay_rng)?,
                    Memory::Per(b) => {
                        b.sample(config.batch_size, per_cfg.beta_at(train_step), &per_cfg, &mut replay_rng)?
                    }
                };
                for idx in &batch.indices {
                    digest.update((idx.slot as u64).to_le_bytes());
                }
                match update(&mut agent, &batch, config) {
                    Ok((deltas, omegas, multipliers)) => {
                        if first_mean_below_median.is_none() && mean_below_median(&deltas) {
                            first_mean_below_median = Some(train_step);
                        }
                        if let Memory::Per(b) = &mut memory {
                            b.update_priorities(&batch.indices, deltas.values(), &per_cfg)?;
                        }
                        if config.trace_every > 0 && train_step % config.trace_every == 0 {
                            traces.push(BatchTrace {
                                train_step,
                                slots: batch.slots(),
                                td_errors: deltas.values().to_vec(),
                                is_weights: batch.is_weights.clone(),
                                omegas,
                                multipliers,
                            });
                        }
                    }
                    Err(HarnessError::Learner(e @ pbwl::learner::LearnerError::NonFiniteGradient { .. })) => {
                        log::warn!("seed {seed}: {e}");
                        rejected += 1;
                    }
                    Err(e) => return Err(e),
                }
            }

            obs = step.state.clone();
            state = next;
            if step.done() {
                break;
            }
        }
        let _ = obs;
        returns.push(total);
        successes.push(reached);

        if (episode + 1) % config.eval.every == 0 {
            evals.push(evaluate(env.as_mut(), &agent, &eval_seeds, config, episode + 1)?);
        }
    }

    let rates: Vec<f64> = evals.iter().map(|e| e.success_rate).collect();
    let smoothed_success = moving_average(&rates, config.eval.window);
    let convergence_episode = first_sustained_crossing(&smoothed_success, config.success_threshold, config.converge_patience)
        .map(|i| evals[i].episode);
    let stale_updates = match &memory {
        Memory::Per(b) => b.stale_updates(),
        Memory::Uniform(_) => 0,
    };
    let record = RunRecord {
        seed,
        label: label.to_string(),
        fingerprint: config.fingerprint(),
        smoothed_returns: moving_average(&returns, config.window),
        returns,
        successes,
        evals,
        smoothed_success,
        convergence_episode,
        env_steps,
        train_steps: agent.train_steps(),
        rejected_steps: rejected,
        stale_updates,
        batch_digest: hex::encode(digest.finalize()),
        first_mean_below_median,
        traces,
        wall_clock: started.elapsed(),
    };
    log::info!(
        "{label} seed {seed}: {} env steps, final success {:.2}, converged at {:?}, {:.1}s",
        record.env_steps,
        record.final_success(),
        record.convergence_episode,
        record.wall_clock.as_secs_f64()
    );
    Ok(record)
}

fn mean_below_median(deltas: &TdErrorBatch<f64>) -> bool {
    let abs = deltas.abs();
    stats::mean(&abs) < stats::median(&abs)
}

/// Computes weights for one batch and applies the update. Returns the TD
/// errors, the loss weights ω and the combined multipliers.
fn update(
    agent: &mut Agent,
    batch: &SampledBatch<f64>,
    config: &ExperimentConfig,
) -> Result<(TdErrorBatch<f64>, Vec<f64>, Vec<f64>)> {
    let weigh = |deltas: &TdErrorBatch<f64>| -> Result<(Vec<f64>, Vec<f64>)> {
        let omegas = match &config.kernel {
            Some(kernel) => compute_weights(deltas, kernel)?.omegas,
            None => vec![1.0; deltas.len()],
        };
        let multipliers = compose_per_pbwl(&batch.is_weights, &omegas)?;
        Ok((omegas, multipliers))
    };
    match agent {
        Agent::Dqn(learner) => {
            let pass = learner.evaluate(&batch.transitions)?;
            let (omegas, multipliers) = weigh(pass.td_errors())?;
            learner.apply(&pass, &multipliers)?;
            Ok((pass.td_errors().clone(), omegas, multipliers))
        }
        Agent::Tabular { table, lr, decay, steps } => {
            let deltas = table.td_errors(&batch.transitions)?;
            let (omegas, multipliers) = weigh(&deltas)?;
            let rate = *lr / (1.0 + *steps as f64 / *decay);
            table.train_step(&batch.transitions, &multipliers, rate)?;
            *steps += 1;
            Ok((deltas, omegas, multipliers))
        }
    }
}

fn evaluate(
    env: &mut dyn Environment,
    agent: &Agent,
    seeds: &[u64],
    config: &ExperimentConfig,
    episode: usize,
) -> Result<EvalPoint> {
    let mut wins = 0usize;
    let mut total = 0.0;
    for &seed in seeds {
        let mut obs = env.reset(seed);
        loop {
            let state = match config.learner {
                LearnerKind::Dqn => env.features(&obs),
                LearnerKind::Tabular => obs.clone(),
            };
            let action = greedy_action(&agent.q().action_values(&state));
            let step = env.step(action)?;
            total += step.reward;
            if step.terminal {
                wins += 1;
            }
            if step.done() {
                break;
            }
            obs = step.state;
        }
    }
    Ok(EvalPoint {
        episode,
        success_rate: wins as f64 / seeds.len() as f64,
        mean_return: total / seeds.len() as f64,
    })
}
