use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pbwl_harness::ablation::run_ablation;
use pbwl_harness::batch_study::{run_batch_study, DEFAULT_SIZES};
use pbwl_harness::output::write_runs;
use pbwl_harness::per_study::run_per_study;
use pbwl_harness::runner::{run_tasks, seed_tasks};
use pbwl_harness::validate::{render_results, run_property_suite};
use pbwl_harness::{ExperimentConfig, HarnessError};

const EXIT_CONFIG: u8 = 2;
const EXIT_PROPERTY: u8 = 3;

#[derive(Parser)]
#[command(name = "replay-weights", version, about = "Seeded experiments for TD-error loss weighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of one configuration.
    Run(Common),
    /// Run the 12-cell kernel ablation grid.
    Ablate(Common),
    /// Convergence with and without the kernel across batch sizes.
    BatchStudy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated batch sizes.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
        sizes: Vec<usize>,
    },
    /// Uniform and prioritized replay, each with and without the kernel.
    PerStudy(Common),
    /// Check the kernel properties on random batches.
    ValidateKernel {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Versioned JSON config; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds as `a..b`, `a..=b` or `1,2,3`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("cannot parse seeds {text:?}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(HarnessError::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

impl Common {
    fn load(&self, verb: &str) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(text) = &self.seeds {
            cfg.seeds = parse_seeds(text)?;
        }
        if self.jobs == 0 {
            return Err(HarnessError::Config("--jobs must be >= 1".into()));
        }
        cfg.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| Path::new("out").join(verb));
        Ok((cfg, out))
    }
}

fn execute(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = c.load("run")?;
            let runs = run_tasks(&seed_tasks(&cfg, "run"), c.jobs)?;
            let summary = write_runs(&out, "run", &runs)?;
            for s in &summary.seeds {
                println!(
                    "seed {:>3}  converged {:>12}  final success {:.2}",
                    s.seed,
                    s.convergence_episode.map_or_else(|| "not converge".into(), |e| e.to_string()),
                    s.final_success
                );
            }
            println!("fingerprint {}  output {}", summary.fingerprint, out.display());
        }
        Command::Ablate(c) => {
            let (cfg, out) = c.load("ablate")?;
            let report = run_ablation(&cfg, c.jobs)?;
            report.write(&out)?;
            print!("{}", report.to_table());
            let eq = &report.trace_equality;
            println!(
                "combined normalization reduces to its twin: {} ({} run batches, {} recomputed batches)",
                if eq.passed() { "pass" } else { "FAIL" },
                eq.batches_compared,
                eq.batches_recomputed
            );
            return Ok(eq.passed());
        }
        Command::BatchStudy { common, sizes } => {
            let (cfg, out) = common.load("batch-study")?;
            let study = run_batch_study(&cfg, &sizes, common.jobs)?;
            study.write(&out)?;
            print!("{}", study.to_table());
        }
        Command::PerStudy(c) => {
            let (cfg, out) = c.load("per-study")?;
            let study = run_per_study(&cfg, c.jobs)?;
            study.write(&out)?;
            print!("{}", study.to_table());
            return Ok(study.degenerate.passed() && study.multiplier_product.passed());
        }
        Command::ValidateKernel { seed } => {
            let results = run_property_suite(seed);
            print!("{}", render_results(&results));
            if !results.iter().all(|r| r.passed()) {
                return Err(HarnessError::PropertyFailure);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REPLAY_WEIGHTS_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: an exact cross-check failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) => ExitCode::from(EXIT_CONFIG),
                HarnessError::PropertyFailure => ExitCode::from(EXIT_PROPERTY),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
