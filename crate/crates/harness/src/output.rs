//! CSV and JSON emission. Every file carries the config fingerprint.
//!
//! CSVs have a header row, comma separators, '.' decimals and LF line
//! endings. Floats use Rust's shortest round-trip formatting, so files are
//! byte-stable for a given run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::experiment::{EvalPoint, RunRecord};
use crate::smoothing::mean_curve;

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub fn opt_cell(v: Option<usize>) -> String {
    v.map_or_else(|| "not converge".to_string(), |e| e.to_string())
}

pub fn episode_csv(r: &RunRecord) -> String {
    let mut out = String::from("fingerprint,seed,episode,return,smoothed,success\n");
    for (i, (ret, sm)) in r.returns.iter().zip(&r.smoothed_returns).enumerate() {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.fingerprint, r.seed, i + 1, ret, sm, u8::from(r.successes[i]));
    }
    out
}

pub fn eval_csv(r: &RunRecord) -> String {
    let mut out = String::from("fingerprint,seed,episode,success_rate,smoothed_success,mean_return\n");
    for (e, sm) in r.evals.iter().zip(&r.smoothed_success) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.fingerprint, r.seed, e.episode, e.success_rate, sm, e.mean_return
        );
    }
    out
}

/// Mean across seeds of the per-episode and smoothed return curves.
pub fn mean_curve_csv(runs: &[RunRecord]) -> String {
    let fp = fingerprint_of(runs);
    let raw: Vec<Vec<f64>> = runs.iter().map(|r| r.returns.clone()).collect();
    let smooth: Vec<Vec<f64>> = runs.iter().map(|r| r.smoothed_returns.clone()).collect();
    let mut out = String::from("fingerprint,episode,mean_return,mean_smoothed\n");
    for (i, (a, b)) in mean_curve(&raw).iter().zip(mean_curve(&smooth)).enumerate() {
        let _ = writeln!(out, "{fp},{},{a},{b}", i + 1);
    }
    out
}

/// Mean across seeds of the raw and smoothed evaluation success curves.
pub fn mean_eval_csv(runs: &[RunRecord]) -> String {
    let fp = fingerprint_of(runs);
    let raw: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.evals.iter().map(|e| e.success_rate).collect())
        .collect();
    let smooth: Vec<Vec<f64>> = runs.iter().map(|r| r.smoothed_success.clone()).collect();
    let episodes: Vec<usize> = runs.first().map_or_else(Vec::new, |r| r.evals.iter().map(|e| e.episode).collect());
    let mut out = String::from("fingerprint,episode,mean_success,mean_smoothed_success\n");
    for ((ep, a), b) in episodes.iter().zip(mean_curve(&raw)).zip(mean_curve(&smooth)) {
        let _ = writeln!(out, "{fp},{ep},{a},{b}");
    }
    out
}

/// Per-seed trace lines, one JSON object per logged batch.
pub fn trace_jsonl(r: &RunRecord) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        fingerprint: &'a str,
        seed: u64,
        #[serde(flatten)]
        trace: &'a crate::experiment::BatchTrace,
    }
    let mut out = String::new();
    for t in &r.traces {
        let line = Line {
            fingerprint: &r.fingerprint,
            seed: r.seed,
            trace: t,
        };
        out.push_str(&serde_json::to_string(&line).expect("trace serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub convergence_episode: Option<usize>,
    pub final_success: f64,
    pub final_smoothed_return: f64,
    pub env_steps: u64,
    pub train_steps: u64,
    pub rejected_steps: u64,
    pub stale_updates: u64,
    pub batch_digest: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub label: String,
    pub seeds: Vec<SeedSummary>,
    /// Mean over converged seeds; `None` if no seed converged.
    pub mean_convergence_episode: Option<f64>,
    pub median_convergence_episode: Option<f64>,
    pub not_converged: usize,
    pub mean_final_success: f64,
}

pub fn summarize(label: &str, runs: &[RunRecord]) -> RunSummary {
    let converged: Vec<f64> = runs.iter().filter_map(|r| r.convergence_episode).map(|e| e as f64).collect();
    let (mean, median) = if converged.is_empty() {
        (None, None)
    } else {
        (
            Some(crate::smoothing::mean(&converged)),
            Some(crate::smoothing::median(&converged)),
        )
    };
    let finals: Vec<f64> = runs.iter().map(RunRecord::final_success).collect();
    RunSummary {
        fingerprint: fingerprint_of(runs),
        label: label.to_string(),
        seeds: runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                convergence_episode: r.convergence_episode,
                final_success: r.final_success(),
                final_smoothed_return: r.smoothed_returns.last().copied().unwrap_or(0.0),
                env_steps: r.env_steps,
                train_steps: r.train_steps,
                rejected_steps: r.rejected_steps,
                stale_updates: r.stale_updates,
                batch_digest: r.batch_digest.clone(),
            })
            .collect(),
        mean_convergence_episode: mean,
        median_convergence_episode: median,
        not_converged: runs.len() - converged.len(),
        mean_final_success: if finals.is_empty() { 0.0 } else { crate::smoothing::mean(&finals) },
    }
}

pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes the full set of per-run files for one labelled group of seeds.
pub fn write_runs(dir: &Path, label: &str, runs: &[RunRecord]) -> Result<RunSummary> {
    for r in runs {
        write_file(&dir.join(format!("run_seed{}.csv", r.seed)), &episode_csv(r))?;
        write_file(&dir.join(format!("eval_seed{}.csv", r.seed)), &eval_csv(r))?;
        if !r.traces.is_empty() {
            write_file(&dir.join(format!("trace_seed{}.jsonl", r.seed)), &trace_jsonl(r))?;
        }
    }
    write_file(&dir.join("mean_curve.csv"), &mean_curve_csv(runs))?;
    write_file(&dir.join("mean_eval.csv"), &mean_eval_csv(runs))?;
    let summary = summarize(label, runs);
    write_file(&dir.join("summary.json"), &to_json(&summary))?;
    Ok(summary)
}

fn fingerprint_of(runs: &[RunRecord]) -> String {
    runs.first().map(|r| r.fingerprint.clone()).unwrap_or_default()
}

/// Evaluation points shared by all runs of a group (the cadence is fixed by
/// the config).
pub fn eval_episodes(runs: &[RunRecord]) -> Vec<usize> {
    runs.first()
        .map(|r| r.evals.iter().map(|e: &EvalPoint| e.episode).collect())
        .unwrap_or_default()
}
