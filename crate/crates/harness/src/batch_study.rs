//! Batch-size convergence study: each size with the kernel on and off.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{stream_rng, RunRecord};
use crate::output::{to_json, write_file, write_runs};
use crate::runner::{run_tasks, Task};
use crate::smoothing::{mean, median, meets_threshold};

pub const DEFAULT_SIZES: [usize; 3] = [128, 256, 512];

/// Convergence statistics of one arm (a batch size with the kernel on or off).
#[derive(Debug, Clone, Serialize)]
pub struct ArmStats {
    pub label: String,
    /// Mean convergence episode over the seeds that converged.
    pub mean_convergence: Option<f64>,
    pub median_convergence: Option<f64>,
    /// Seeds that never converged, excluded from the mean.
    pub not_converged: usize,
    /// Seeds whose final smoothed success reached the threshold.
    pub seeds_at_threshold: usize,
    pub seeds: usize,
}

impl ArmStats {
    pub fn from_runs(label: &str, runs: &[RunRecord], threshold: f64) -> Self {
        let conv: Vec<f64> = runs.iter().filter_map(|r| r.convergence_episode).map(|e| e as f64).collect();
        Self {
            label: label.to_string(),
            mean_convergence: (!conv.is_empty()).then(|| mean(&conv)),
            median_convergence: (!conv.is_empty()).then(|| median(&conv)),
            not_converged: runs.len() - conv.len(),
            seeds_at_threshold: runs
                .iter()
                .filter(|r| r.smoothed_success.iter().any(|&s| meets_threshold(s, threshold)))
                .count(),
            seeds: runs.len(),
        }
    }
}

/// `(off − on) / off` in percent, or `None` when either arm never converged.
pub fn reduction_rate(off: Option<f64>, on: Option<f64>) -> Option<f64> {
    match (off, on) {
        (Some(off), Some(on)) if off > 0.0 => Some((off - on) / off * 100.0),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchRow {
    pub batch_size: usize,
    pub off: ArmStats,
    pub on: ArmStats,
    pub reduction_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchStudy {
    pub fingerprint: String,
    pub threshold: f64,
    pub patience: usize,
    pub rows: Vec<BatchRow>,
    #[serde(skip)]
    pub runs: Vec<(usize, Vec<RunRecord>, Vec<RunRecord>)>,
}

fn arm_label(size: usize, on: bool) -> String {
    format!("batch{size}-{}", if on { "pbwl" } else { "baseline" })
}

/// Runs every size with the kernel off (`kernel = None`) and on (the base
/// kernel, or the default kernel if the base has none).
pub fn run_batch_study(base: &ExperimentConfig, sizes: &[usize], jobs: usize) -> Result<BatchStudy> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(HarnessError::Config("batch sizes must be a nonempty list of positive sizes".into()));
    }
    base.validate()?;
    let kernel = base.kernel.unwrap_or_default();
    let arms: Vec<(usize, bool, ExperimentConfig)> = sizes
        .iter()
        .flat_map(|&n| {
            [false, true].into_iter().map(move |on| {
                let cfg = ExperimentConfig {
                    batch_size: n,
                    buffer_capacity: base.buffer_capacity.max(n),
                    kernel: on.then_some(kernel),
                    ..base.clone()
                };
                (n, on, cfg)
            })
        })
        .collect();
    for (_, _, cfg) in &arms {
        cfg.validate()?;
    }
    let mut seeds = base.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let tasks: Vec<Task> = seeds
        .iter()
        .flat_map(|&seed| {
            arms.iter().map(move |(n, on, cfg)| Task {
                label: arm_label(*n, *on),
                config: cfg.clone(),
                seed,
            })
        })
        .collect();
    let fingerprint = base.fingerprint();
    let records = run_tasks(&tasks, jobs)?;
    let mut by_arm: Vec<Vec<RunRecord>> = vec![Vec::new(); arms.len()];
    for (i, mut r) in records.into_iter().enumerate() {
        r.fingerprint.clone_from(&fingerprint);
        by_arm[i % arms.len()].push(r);
    }

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut it = by_arm.into_iter();
    for &n in sizes {
        let off = it.next().expect("off arm");
        let on = it.next().expect("on arm");
        let off_stats = ArmStats::from_runs(&arm_label(n, false), &off, base.success_threshold);
        let on_stats = ArmStats::from_runs(&arm_label(n, true), &on, base.success_threshold);
        rows.push(BatchRow {
            batch_size: n,
            reduction_rate: reduction_rate(off_stats.mean_convergence, on_stats.mean_convergence),
            off: off_stats,
            on: on_stats,
        });
        runs.push((n, off, on));
    }
    Ok(BatchStudy {
        fingerprint,
        threshold: base.success_threshold,
        patience: base.converge_patience,
        rows,
        runs,
    })
}

fn conv_cell(s: &ArmStats) -> String {
    let mut cell = s.mean_convergence.map_or_else(|| "not converge".to_string(), |m| format!("{m:.1}"));
    if s.mean_convergence.is_some() && s.not_converged > 0 {
        let _ = write!(cell, " [{}]", s.not_converged);
    }
    cell
}

fn rate_cell(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |r| format!("{r:.1} %"))
}

impl BatchStudy {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "fingerprint,batch_size,mean_off,mean_on,not_converged_off,not_converged_on,median_off,median_on,reduction_rate\n",
        );
        let opt = |v: Option<f64>| v.map_or_else(|| "not converge".to_string(), |v| v.to_string());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.fingerprint,
                r.batch_size,
                opt(r.off.mean_convergence),
                opt(r.on.mean_convergence),
                r.off.not_converged,
                r.on.not_converged,
                opt(r.off.median_convergence),
                opt(r.on.median_convergence),
                r.reduction_rate.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
            );
        }
        out
    }

    /// Aligned table: batch size, mean convergence episode without and with
    /// the kernel, reduction rate.
    pub fn to_table(&self) -> String {
        let mut lines = vec![vec![
            "Batch size".to_string(),
            "w/o PBWL".into(),
            "w/ PBWL".into(),
            "Reduction Rate".into(),
        ]];
        for r in &self.rows {
            lines.push(vec![
                r.batch_size.to_string(),
                conv_cell(&r.off),
                conv_cell(&r.on),
                rate_cell(r.reduction_rate),
            ]);
        }
        let mut out = crate::ablation::render(&lines);
        let _ = writeln!(
            out,
            "Mean convergence episode over converged seeds; [k] = k seeds did not converge and are excluded. \
             Converged = smoothed success >= {} for {} consecutive evaluations. fingerprint {}",
            self.threshold, self.patience, self.fingerprint
        );
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (_, off, on) in &self.runs {
            for arm in [off, on] {
                if let Some(first) = arm.first() {
                    write_runs(&dir.join(&first.label), &first.label, arm)?;
                }
            }
        }
        write_file(&dir.join("batch_study.csv"), &self.to_csv())?;
        write_file(&dir.join("batch_study.txt"), &self.to_table())?;
        write_file(&dir.join("batch_study.json"), &to_json(self))
    }
}

/// Percentile bootstrap interval for `mean(b) − mean(a)`.
pub fn bootstrap_mean_diff(a: &[f64], b: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let mut diffs: Vec<f64> = (0..resamples)
        .map(|_| {
            let ma = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).sum::<f64>() / a.len() as f64;
            let mb = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).sum::<f64>() / b.len() as f64;
            mb - ma
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let idx = |q: f64| ((q * (resamples - 1) as f64).round() as usize).min(resamples - 1);
    (diffs[idx(tail)], diffs[idx(1.0 - tail)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_rate_arithmetic() {
        let r = reduction_rate(Some(53.2), Some(34.3)).unwrap();
        assert_eq!(format!("{r:.1}"), "35.5");
        assert_eq!(reduction_rate(Some(40.0), Some(40.0)), Some(0.0));
        assert_eq!(reduction_rate(Some(82.5), None), None);
        assert_eq!(rate_cell(None), "-");
    }

    #[test]
    fn bootstrap_of_identical_samples_is_zero() {
        let a = [1.0, 1.0, 1.0];
        assert_eq!(bootstrap_mean_diff(&a, &a, 200, 0.95, 1), (0.0, 0.0));
    }
}
