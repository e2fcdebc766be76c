//! Four-arm comparison of uniform and prioritized replay, each with and
//! without the kernel, plus two exact cross-checks.

use std::fmt::Write as _;
use std::path::Path;

use pbwl::compute_weights;
use pbwl::replay::PerConfig;
use pbwl::TdErrorBatch;
use serde::Serialize;

use crate::batch_study::ArmStats;
use crate::config::{BufferKind, ExperimentConfig};
use crate::error::Result;
use crate::experiment::RunRecord;
use crate::output::{to_json, write_file, write_runs};
use crate::runner::{run_tasks, Task};
use crate::smoothing::{mean, mean_curve};

pub const ARMS: [&str; 4] = ["baseline", "pbwl", "per", "per-pbwl"];

pub fn arm_config(base: &ExperimentConfig, arm: &str) -> ExperimentConfig {
    let kernel = base.kernel.unwrap_or_default();
    let (buffer, kernel) = match arm {
        "baseline" => (BufferKind::Uniform, None),
        "pbwl" => (BufferKind::Uniform, Some(kernel)),
        "per" => (BufferKind::Per, None),
        "per-pbwl" => (BufferKind::Per, Some(kernel)),
        _ => unreachable!("unknown arm {arm}"),
    };
    ExperimentConfig {
        buffer,
        kernel,
        ..base.clone()
    }
}

/// Prioritized replay reduced to uniform sampling: α = 0, β = 0 and
/// independent draws.
pub fn degenerate_per_config(base: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        buffer: BufferKind::Per,
        kernel: None,
        per: PerConfig {
            alpha: 0.0,
            beta_start: 0.0,
            beta_end: 0.0,
            stratified: false,
            ..base.per
        },
        ..base.clone()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactCheck {
    pub compared: usize,
    pub mismatches: usize,
}

impl ExactCheck {
    pub fn passed(&self) -> bool {
        self.compared > 0 && self.mismatches == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmSummary {
    pub stats: ArmStats,
    pub mean_final_success: f64,
    pub mean_final_return: f64,
    /// Mean over seeds of the average smoothed success across evaluations.
    pub mean_success_auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerStudy {
    pub fingerprint: String,
    pub arms: Vec<ArmSummary>,
    /// Differences against the baseline arm, in arm order.
    pub deltas_vs_baseline: Vec<(String, f64, f64)>,
    /// Degenerate prioritized replay matches the baseline run exactly.
    pub degenerate: ExactCheck,
    /// Logged multipliers equal IS weight × recomputed kernel weight.
    pub multiplier_product: ExactCheck,
    #[serde(skip)]
    pub runs: Vec<Vec<RunRecord>>,
}

fn summary(stats: ArmStats, runs: &[RunRecord]) -> ArmSummary {
    let finals: Vec<f64> = runs.iter().map(RunRecord::final_success).collect();
    let rets: Vec<f64> = runs.iter().map(|r| r.smoothed_returns.last().copied().unwrap_or(0.0)).collect();
    let auc: Vec<f64> = runs
        .iter()
        .map(|r| if r.smoothed_success.is_empty() { 0.0 } else { mean(&r.smoothed_success) })
        .collect();
    ArmSummary {
        stats,
        mean_final_success: mean(&finals),
        mean_final_return: mean(&rets),
        mean_success_auc: mean(&auc),
    }
}

/// Same seed, same behaviour: everything but label and fingerprint agrees.
fn same_run(a: &RunRecord, b: &RunRecord) -> bool {
    a.returns == b.returns
        && a.evals == b.evals
        && a.batch_digest == b.batch_digest
        && a.env_steps == b.env_steps
        && a.train_steps == b.train_steps
        && a.traces.len() == b.traces.len()
        && a.traces.iter().zip(&b.traces).all(|(x, y)| {
            x.train_step == y.train_step && x.slots == y.slots && x.td_errors == y.td_errors && x.multipliers == y.multipliers
        })
}

pub fn run_per_study(base: &ExperimentConfig, jobs: usize) -> Result<PerStudy> {
    base.validate()?;
    let mut seeds = base.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut configs: Vec<(String, ExperimentConfig)> =
        ARMS.iter().map(|a| (a.to_string(), arm_config(base, a))).collect();
    configs.push(("per-degenerate".into(), degenerate_per_config(base)));
    let tasks: Vec<Task> = seeds
        .iter()
        .flat_map(|&seed| {
            configs.iter().map(move |(label, cfg)| Task {
                label: label.clone(),
                config: cfg.clone(),
                seed,
            })
        })
        .collect();
    let fingerprint = base.fingerprint();
    let records = run_tasks(&tasks, jobs)?;
    let mut runs: Vec<Vec<RunRecord>> = vec![Vec::new(); configs.len()];
    for (i, mut r) in records.into_iter().enumerate() {
        r.fingerprint.clone_from(&fingerprint);
        runs[i % configs.len()].push(r);
    }
    let degenerate_runs = runs.pop().expect("degenerate arm");

    let degenerate = ExactCheck {
        compared: degenerate_runs.len(),
        mismatches: runs[0]
            .iter()
            .zip(&degenerate_runs)
            .filter(|(a, b)| !same_run(a, b))
            .count(),
    };

    let kernel = base.kernel.unwrap_or_default();
    let mut product = ExactCheck {
        compared: 0,
        mismatches: 0,
    };
    for r in &runs[3] {
        for t in &r.traces {
            product.compared += 1;
            let omegas = TdErrorBatch::new(t.td_errors.clone())
                .and_then(|b| compute_weights(&b, &kernel))
                .map(|w| w.omegas);
            let ok = match omegas {
                Ok(w) => {
                    w == t.omegas
                        && t.multipliers.len() == w.len()
                        && t.multipliers.iter().zip(&t.is_weights).zip(&w).all(|((m, i), o)| *m == i * o)
                }
                Err(_) => false,
            };
            if !ok {
                product.mismatches += 1;
            }
        }
    }

    let arms: Vec<ArmSummary> = ARMS
        .iter()
        .zip(&runs)
        .map(|(a, r)| summary(ArmStats::from_runs(a, r, base.success_threshold), r))
        .collect();
    let deltas_vs_baseline = arms
        .iter()
        .skip(1)
        .map(|a| {
            (
                a.stats.label.clone(),
                a.mean_final_success - arms[0].mean_final_success,
                a.mean_success_auc - arms[0].mean_success_auc,
            )
        })
        .collect();
    Ok(PerStudy {
        fingerprint,
        arms,
        deltas_vs_baseline,
        degenerate,
        multiplier_product: product,
        runs,
    })
}

impl PerStudy {
    /// Mean smoothed success per arm at each evaluation, side by side.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("fingerprint,episode");
        for a in ARMS {
            let _ = write!(out, ",{a}_success,{a}_return");
        }
        out.push('\n');
        let episodes = crate::output::eval_episodes(&self.runs[0]);
        let succ: Vec<Vec<f64>> = self
            .runs
            .iter()
            .map(|arm| mean_curve(&arm.iter().map(|r| r.smoothed_success.clone()).collect::<Vec<_>>()))
            .collect();
        let ret: Vec<Vec<f64>> = self
            .runs
            .iter()
            .map(|arm| {
                let points: Vec<Vec<f64>> = arm
                    .iter()
                    .map(|r| r.evals.iter().map(|e| r.smoothed_returns[e.episode - 1]).collect())
                    .collect();
                mean_curve(&points)
            })
            .collect();
        for (i, ep) in episodes.iter().enumerate() {
            let _ = write!(out, "{},{ep}", self.fingerprint);
            for a in 0..ARMS.len() {
                let _ = write!(out, ",{},{}", succ[a][i], ret[a][i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut lines = vec![vec![
            "Arm".to_string(),
            "Mean conv.".into(),
            "Not conv.".into(),
            "Final success".into(),
            "Success AUC".into(),
            "Final return".into(),
        ]];
        for a in &self.arms {
            lines.push(vec![
                a.stats.label.clone(),
                a.stats.mean_convergence.map_or_else(|| "not converge".into(), |m| format!("{m:.1}")),
                a.stats.not_converged.to_string(),
                format!("{:.3}", a.mean_final_success),
                format!("{:.3}", a.mean_success_auc),
                format!("{:.2}", a.mean_final_return),
            ]);
        }
        let mut out = crate::ablation::render(&lines);
        for (label, d_final, d_auc) in &self.deltas_vs_baseline {
            let _ = writeln!(out, "{label} vs baseline: final success {d_final:+.3}, success AUC {d_auc:+.3}");
        }
        let verdict = |c: &ExactCheck| if c.passed() { "pass" } else { "FAIL" };
        let _ = writeln!(
            out,
            "degenerate PER equals baseline: {} ({} seeds, {} mismatches)",
            verdict(&self.degenerate),
            self.degenerate.compared,
            self.degenerate.mismatches
        );
        let _ = writeln!(
            out,
            "multipliers = IS weight x kernel weight: {} ({} batches, {} mismatches)",
            verdict(&self.multiplier_product),
            self.multiplier_product.compared,
            self.multiplier_product.mismatches
        );
        let _ = writeln!(out, "fingerprint {}", self.fingerprint);
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (arm, runs) in ARMS.iter().zip(&self.runs) {
            write_runs(&dir.join(arm), arm, runs)?;
        }
        write_file(&dir.join("per_curves.csv"), &self.curves_csv())?;
        write_file(&dir.join("per_study.txt"), &self.to_table())?;
        write_file(&dir.join("per_study.json"), &to_json(self))
    }
}
