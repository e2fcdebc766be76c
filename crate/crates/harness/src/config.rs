//! Versioned JSON experiment configuration.

use std::path::Path;

use pbwl::learner::{DqnConfig, OptimizerConfig};
use pbwl::replay::PerConfig;
use pbwl::KernelConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Dqn,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferKind {
    Uniform,
    Per,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Training episodes between greedy evaluations.
    pub every: usize,
    /// Greedy episodes per evaluation.
    pub episodes: usize,
    /// Moving-average window over evaluations.
    pub window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            every: 5,
            episodes: 10,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    pub start: f64,
    pub end: f64,
    /// Fraction of the step budget over which ε decays linearly.
    pub decay_fraction: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub env: String,
    pub learner: LearnerKind,
    pub buffer: BufferKind,
    /// Loss-weighting pipeline; `null` trains on the plain MSE loss.
    pub kernel: Option<KernelConfig>,
    pub per: PerConfig,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Environment steps per update.
    pub train_every: usize,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub eval: EvalConfig,
    /// Moving-average window over training returns.
    pub window: usize,
    /// Smoothed success rate that counts as converged.
    pub success_threshold: f64,
    /// Consecutive evaluations at or above the threshold.
    pub converge_patience: usize,
    pub exploration: ExplorationConfig,
    pub dqn: DqnConfig,
    /// Tabular learning rate `lr_t = lr / (1 + t/lr_decay_steps)`.
    pub tabular_lr: f64,
    pub tabular_lr_decay_steps: f64,
    /// Log every k-th training batch (0 disables).
    pub trace_every: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            env: "mountaincar-shaped".into(),
            learner: LearnerKind::Dqn,
            buffer: BufferKind::Uniform,
            kernel: Some(KernelConfig::default()),
            per: PerConfig::default(),
            batch_size: 64,
            buffer_capacity: 50_000,
            warmup: 1_000,
            train_every: 1,
            episodes: 250,
            seeds: (0..10).collect(),
            eval: EvalConfig::default(),
            window: 10,
            success_threshold: 0.9,
            converge_patience: 5,
            exploration: ExplorationConfig::default(),
            dqn: DqnConfig {
                optimizer: OptimizerConfig::adam(1e-3),
                target_sync: 500,
                ..DqnConfig::default()
            },
            tabular_lr: 0.5,
            tabular_lr_decay_steps: 1e5,
            trace_every: 500,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {}", self.version));
        }
        let env = pbwl::envs::make_env(&self.env).map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.learner == LearnerKind::Tabular && !self.env.starts_with("chain-") {
            return fail(format!("tabular learner needs a chain environment, got {:?}", self.env));
        }
        if env.max_steps() == 0 {
            return fail("environment has no step budget".into());
        }
        if self.seeds.is_empty() {
            return fail("seed list is empty".into());
        }
        if self.window == 0 || self.eval.window == 0 {
            return fail("moving-average windows must be >= 1".into());
        }
        if self.batch_size == 0 || self.episodes == 0 || self.train_every == 0 {
            return fail("batch_size, episodes and train_every must be >= 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            return fail("buffer_capacity must be at least batch_size".into());
        }
        if self.eval.every == 0 || self.eval.episodes == 0 || self.converge_patience == 0 {
            return fail("eval.every, eval.episodes and converge_patience must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return fail("success_threshold must lie in [0, 1]".into());
        }
        let e = &self.exploration;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || !(e.decay_fraction > 0.0) {
            return fail("exploration: start/end in [0, 1], decay_fraction > 0".into());
        }
        if !(self.dqn.gamma > 0.0 && self.dqn.gamma < 1.0) {
            return fail("dqn.gamma must lie in (0, 1)".into());
        }
        self.per.validate().map_err(HarnessError::Config)?;
        Ok(())
    }

    /// Hex SHA-256 (first 16 chars) of the canonical JSON of everything that
    /// affects results; the output directory is excluded.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// Upper bound on environment steps, used as the annealing horizon.
    pub fn step_budget(&self) -> u64 {
        let cap = pbwl::envs::make_env(&self.env).map(|e| e.max_steps()).unwrap_or(1);
        (self.episodes * cap) as u64
    }
}
