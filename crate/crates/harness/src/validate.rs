//! Kernel property suite run by `validate-kernel`.

use std::fmt::Write as _;

use pbwl::kernel::stats::population_std;
use pbwl::kernel::{gaussian_density, gaussian_raw_priority, positive_preferential_value, softmax_weights};
use pbwl::{compute_weights, KernelConfig, TdErrorBatch};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Uniform};
use serde::Serialize;

use crate::experiment::stream_rng;

pub const BATCHES: usize = 1000;
pub const OFFSET_TOL: f64 = 1e-12;
pub const SUM_TOL: f64 = 1e-12;
pub const L1_TOL: f64 = 1e-9;
const ORDER_SAMPLES: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub checked: usize,
    pub failures: usize,
    /// Largest error seen, for the tolerance checks.
    pub worst: Option<f64>,
}

impl PropertyResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            failures: 0,
            worst: None,
        }
    }

    fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
        }
    }

    fn record_err(&mut self, err: f64, tol: f64) {
        self.worst = Some(self.worst.map_or(err, |w| w.max(err)));
        self.record(err <= tol);
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures == 0
    }
}

/// TD error shapes: symmetric, flat, and a long left tail.
#[derive(Debug, Clone, Copy)]
pub enum Generator {
    Normal,
    Uniform,
    NegativelySkewed,
}

impl Generator {
    pub fn sample(self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Generator::Normal => {
                let d = Normal::new(0.0, 1.0).unwrap();
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Generator::Uniform => {
                let d = Uniform::new(-1.0, 1.0).unwrap();
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Generator::NegativelySkewed => {
                let d = Gamma::new(2.0, 1.0).unwrap();
                (0..n).map(|_| 2.0 - d.sample(rng)).collect()
            }
        }
    }
}

const GENERATORS: [Generator; 3] = [Generator::Normal, Generator::Uniform, Generator::NegativelySkewed];

fn degenerate_batches() -> Vec<Vec<f64>> {
    vec![
        vec![0.7; 16],
        vec![-3.0; 5],
        vec![0.0; 8],
        vec![0.0],
        vec![2.5],
        vec![-1e-300],
    ]
}

/// Runs every property on `BATCHES` random batches drawn from `seed`.
pub fn run_property_suite(seed: u64) -> Vec<PropertyResult> {
    let mut rng = stream_rng(seed, 0);
    let cfg = KernelConfig::default();

    let mut offset = PropertyResult::new("softmax offset invariance");
    let mut sum_one = PropertyResult::new("priorities sum to one");
    let mut positive = PropertyResult::new("weights strictly positive");
    let mut l1 = PropertyResult::new("L1 compensation identity");
    let mut lowers = PropertyResult::new("uncompensated loss below MSE");
    let mut ordering = PropertyResult::new("positive side preferred");
    let mut argmax = PropertyResult::new("argmax weight at argmin |delta_m|");
    let mut degenerate = PropertyResult::new("degenerate batches give unit weights");

    for b in 0..BATCHES {
        let n = rng.random_range(2..=512);
        let gen = GENERATORS[b % GENERATORS.len()];
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let values: Vec<f64> = gen.sample(n, &mut rng).into_iter().map(|v| v * scale).collect();
        let batch = TdErrorBatch::new(values).expect("finite batch");
        let w = compute_weights(&batch, &cfg).expect("kernel runs");
        let stages = w.trace().expect("stages recorded");

        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = stages.delta_g.iter().map(|g| g + c).collect();
        let p_shift = softmax_weights(&shifted).expect("finite");
        let err = p_shift
            .iter()
            .zip(&stages.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        offset.record_err(err, OFFSET_TOL);

        sum_one.record_err((stages.p.iter().sum::<f64>() - 1.0).abs(), SUM_TOL);
        positive.record(w.omegas.iter().all(|&o| o > 0.0 && o.is_finite()));

        let raw: f64 = batch.values().iter().map(|d| d.abs()).sum();
        let weighted: f64 = w.omegas.iter().zip(batch.values()).map(|(o, d)| (o * d).abs()).sum();
        l1.record_err((weighted - raw).abs(), L1_TOL);

        // ω = p, before compensation.
        let p = &stages.p;
        let mse: f64 = batch.values().iter().map(|d| d * d).sum::<f64>() / n as f64;
        let ploss: f64 = p.iter().zip(batch.values()).map(|(p, d)| (p * d).powi(2)).sum::<f64>() / n as f64;
        lowers.record(ploss < mse);

        let sigma = population_std(&stages.delta_m);
        if sigma > 0.0 {
            for _ in 0..ORDER_SAMPLES {
                let a: f64 = 5.0 - rng.random_range(0.0..5.0);
                let plus = gaussian_density(positive_preferential_value(a), sigma);
                let minus = gaussian_density(positive_preferential_value(-a), sigma);
                ordering.record(plus > minus);
            }
        }

        let (imin, _) = stages
            .delta_m
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v.abs() < bv { (i, v.abs()) } else { (bi, bv) });
        let max_omega = w.omegas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        argmax.record(w.omegas[imin] == max_omega);
    }

    for values in degenerate_batches() {
        for cell in KernelConfig::ablation_grid() {
            let batch = TdErrorBatch::new(values.clone()).unwrap();
            let ok = compute_weights(&batch, &cell)
                .map(|w| w.omegas.iter().all(|&o| o == 1.0))
                .unwrap_or(false);
            degenerate.record(ok);
        }
        // The raw priorities must stay finite too.
        degenerate.record(gaussian_raw_priority(&values).map(|g| g.iter().all(|v| v.is_finite())).unwrap_or(false));
    }

    vec![offset, sum_one, positive, l1, lowers, ordering, argmax, degenerate]
}

pub fn render_results(results: &[PropertyResult]) -> String {
    let mut lines = vec![vec![
        "Property".to_string(),
        "Result".into(),
        "Checked".into(),
        "Failures".into(),
        "Worst".into(),
    ]];
    for r in results {
        lines.push(vec![
            r.name.to_string(),
            if r.passed() { "pass" } else { "FAIL" }.into(),
            r.checked.to_string(),
            r.failures.to_string(),
            r.worst.map_or_else(|| "-".into(), |w| format!("{w:.3e}")),
        ]);
    }
    let mut out = crate::ablation::render(&lines);
    let passed = results.iter().filter(|r| r.passed()).count();
    let _ = writeln!(out, "{passed}/{} properties hold", results.len());
    out
}
