//! The 12-cell kernel ablation grid: normalization × softmax × norm.

use std::fmt::Write as _;
use std::path::Path;

use pbwl::kernel::stats;
use pbwl::{compute_weights, CompensationNorm, KernelConfig, Normalization, TdErrorBatch};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::RunRecord;
use crate::output::{to_json, write_file, write_runs};
use crate::runner::{run_tasks, Task};
use crate::smoothing::{mean, population_std};

/// Fractions of the episode budget at which the success metric is read.
pub const CHECKPOINTS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub kernel: KernelConfig,
    pub is_default: bool,
    pub checkpoints: Vec<MeanStd>,
}

/// Combined normalization must reduce to its twin cell bit for bit.
///
/// Run level: combined and median runs agree on every logged batch taken
/// before the first batch whose mean |δ| fell below its median. Batch level:
/// each logged combined batch, recomputed from its TD errors with median (or
/// mean, when the mean was smaller) normalization, gives the logged weights.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEquality {
    pub pairs: usize,
    pub batches_compared: usize,
    pub mismatches: usize,
    pub batches_recomputed: usize,
    pub recompute_mismatches: usize,
}

impl TraceEquality {
    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.recompute_mismatches == 0 && self.batches_recomputed > 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub fingerprint: String,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
    pub trace_equality: TraceEquality,
    #[serde(skip)]
    pub runs: Vec<Vec<RunRecord>>,
}

pub fn cell_config(base: &ExperimentConfig, kernel: KernelConfig) -> ExperimentConfig {
    ExperimentConfig {
        kernel: Some(kernel),
        ..base.clone()
    }
}

/// Runs every cell on every seed of `base`.
pub fn run_ablation(base: &ExperimentConfig, jobs: usize) -> Result<AblationReport> {
    base.validate()?;
    let grid = KernelConfig::ablation_grid();
    let fingerprint = base.fingerprint();
    let mut seeds = base.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    // Canonical order: by seed, then cell.
    let tasks: Vec<Task> = seeds
        .iter()
        .flat_map(|&seed| {
            grid.iter().map(move |k| Task {
                label: k.label(),
                config: cell_config(base, *k),
                seed,
            })
        })
        .collect();
    let records = run_tasks(&tasks, jobs)?;

    let mut runs: Vec<Vec<RunRecord>> = vec![Vec::with_capacity(seeds.len()); grid.len()];
    for (i, mut r) in records.into_iter().enumerate() {
        r.fingerprint.clone_from(&fingerprint);
        runs[i % grid.len()].push(r);
    }

    let default = KernelConfig::default();
    let rows = grid
        .iter()
        .zip(&runs)
        .map(|(k, cell)| AblationRow {
            label: k.label(),
            kernel: *k,
            is_default: *k == default,
            checkpoints: CHECKPOINTS
                .iter()
                .map(|&f| {
                    let v: Vec<f64> = cell.iter().map(|r| r.success_at(f, base.episodes)).collect();
                    MeanStd {
                        mean: mean(&v),
                        std: population_std(&v),
                    }
                })
                .collect(),
        })
        .collect();

    let trace_equality = combined_median_equality(&grid, &runs);
    Ok(AblationReport {
        fingerprint,
        episodes: base.episodes,
        seeds,
        rows,
        trace_equality,
        runs,
    })
}

fn combined_median_equality(grid: &[KernelConfig], runs: &[Vec<RunRecord>]) -> TraceEquality {
    let mut eq = TraceEquality {
        pairs: 0,
        batches_compared: 0,
        mismatches: 0,
        batches_recomputed: 0,
        recompute_mismatches: 0,
    };
    for (ci, c) in grid.iter().enumerate() {
        if c.normalization != Normalization::Combined {
            continue;
        }
        let twin = KernelConfig {
            normalization: Normalization::Median,
            ..*c
        };
        let Some(mi) = grid.iter().position(|k| *k == twin) else {
            continue;
        };
        for (a, b) in runs[ci].iter().zip(&runs[mi]) {
            eq.pairs += 1;
            let horizon = a.first_mean_below_median.unwrap_or(u64::MAX);
            for (ta, tb) in a.traces.iter().zip(&b.traces) {
                if ta.train_step >= horizon {
                    break;
                }
                eq.batches_compared += 1;
                if ta != tb {
                    eq.mismatches += 1;
                }
            }
        }
        for run in &runs[ci] {
            for t in &run.traces {
                let abs: Vec<f64> = t.td_errors.iter().map(|d| d.abs()).collect();
                let normalization = if stats::mean(&abs) < stats::median(&abs) {
                    Normalization::Mean
                } else {
                    Normalization::Median
                };
                let recomputed = TdErrorBatch::new(t.td_errors.clone())
                    .and_then(|b| compute_weights(&b, &KernelConfig { normalization, ..*c }));
                eq.batches_recomputed += 1;
                if !recomputed.is_ok_and(|w| w.omegas == t.omegas) {
                    eq.recompute_mismatches += 1;
                }
            }
        }
    }
    eq
}

fn norm_name(n: Normalization) -> &'static str {
    match n {
        Normalization::Combined => "Combined",
        Normalization::Mean => "Mean",
        Normalization::Median => "Median",
    }
}

fn comp_name(c: CompensationNorm) -> &'static str {
    match c {
        CompensationNorm::L1 => "L1",
        CompensationNorm::L2 => "L2",
    }
}

fn checkpoint_header(f: f64) -> String {
    format!("{}%", (f * 100.0).round())
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fingerprint,normalization,softmax,norm,default");
        for f in CHECKPOINTS {
            let p = (f * 100.0).round();
            let _ = write!(out, ",mean_{p},std_{p}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                self.fingerprint,
                norm_name(row.kernel.normalization).to_lowercase(),
                if row.kernel.softmax { "on" } else { "off" },
                comp_name(row.kernel.compensation),
                u8::from(row.is_default)
            );
            for c in &row.checkpoints {
                let _ = write!(out, ",{},{}", c.mean, c.std);
            }
            out.push('\n');
        }
        out
    }

    /// Aligned text table: one row per cell, mean±std at each checkpoint,
    /// the full method marked with `*`.
    pub fn to_table(&self) -> String {
        let mut lines: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Normalization".to_string(), "Softmax".into(), "Norm".into()];
        header.extend(CHECKPOINTS.iter().map(|&f| checkpoint_header(f)));
        lines.push(header);
        let mut last_norm = None;
        let mut last_softmax = None;
        for row in &self.rows {
            let k = row.kernel;
            let norm = if last_norm == Some(k.normalization) {
                String::new()
            } else {
                last_softmax = None;
                norm_name(k.normalization).to_string()
            };
            let softmax = if last_softmax == Some(k.softmax) {
                String::new()
            } else {
                (if k.softmax { "On" } else { "Off" }).to_string()
            };
            last_norm = Some(k.normalization);
            last_softmax = Some(k.softmax);
            let mut line = vec![norm, softmax, comp_name(k.compensation).to_string()];
            for c in &row.checkpoints {
                line.push(format!("{:.2}±{:.2}", c.mean, c.std));
            }
            if row.is_default {
                line[2].push_str(" *");
            }
            lines.push(line);
        }
        let mut out = render(&lines);
        let _ = writeln!(
            out,
            "* default (full method). Smoothed success, mean±std over {} seeds, at fractions of {} episodes. fingerprint {}",
            self.seeds.len(),
            self.episodes,
            self.fingerprint
        );
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (row, cell) in self.rows.iter().zip(&self.runs) {
            write_runs(&dir.join(&row.label), &row.label, cell)?;
        }
        write_file(&dir.join("ablation.csv"), &self.to_csv())?;
        write_file(&dir.join("ablation.txt"), &self.to_table())?;
        write_file(&dir.join("ablation.json"), &to_json(self))
    }
}

/// Left-aligns the first three columns and right-aligns the rest.
pub(crate) fn render(lines: &[Vec<String>]) -> String {
    let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| lines.iter().filter_map(|l| l.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c < 3 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_aligns_columns() {
        let lines = vec![
            vec!["a".to_string(), "bb".into(), "c".into(), "1".into()],
            vec!["aaa".to_string(), "b".into(), "".into(), "10".into()],
        ];
        let text = render(&lines);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "a   | bb | c |  1");
        assert_eq!(rows[1], "----+----+---+---");
        assert_eq!(rows[2], "aaa | b  |   | 10");
    }
}
