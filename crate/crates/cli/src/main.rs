use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use confsel::acceptance::run_suite;
use confsel::{emit_csv, emit_plot, read_report, run_experiment_with_jobs, ExperimentConfig, ExperimentReport};

/// Overrides `--jobs` when set.
const JOBS_ENV: &str = "CONFSEL_JOBS";

#[derive(Parser)]
#[command(name = "confsel", version, about = "Conformal prediction with width-based model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write report.csv and report.svg.
    Run {
        /// Config file with one `key = value` per line.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render a report CSV as an SVG figure.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Miscoverage level for the reference line.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Run acceptance criteria: `all`, `quick`, `monte-carlo`, or ids like `1,7`.
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn jobs_from_env(flag: usize) -> Result<usize> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{JOBS_ENV}={v:?} is not a worker count")),
        Err(_) => Ok(flag),
    }
}

fn print_summary(report: &ExperimentReport) {
    println!("{:<8} {:>5} {:>5} {:>10} {:>10}", "method", "d", "n", "coverage", "width");
    for a in &report.aggregates {
        println!(
            "{:<8} {:>5} {:>5} {:>10.4} {:>10.4}",
            a.method.to_string(),
            a.d,
            a.n,
            a.mean_coverage,
            a.mean_width
        );
    }
    let failed = report.rows.iter().filter(|r| r.is_error()).count();
    if failed > 0 {
        log::warn!("{failed} rows failed; see the chosen column of report.csv");
    }
}

fn run(config: PathBuf, reps: Option<usize>, seed: Option<u64>, out: Option<PathBuf>, jobs: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(r) = reps {
        cfg.reps = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let jobs = jobs_from_env(jobs)?;
    log::info!("running {} with {} reps on {jobs} workers", cfg.scenario, cfg.reps);
    let report = run_experiment_with_jobs(&cfg, jobs)?;
    let csv = cfg.output_dir.join("report.csv");
    let svg = cfg.output_dir.join("report.svg");
    emit_csv(&report, &csv)?;
    emit_plot(&report, &svg, cfg.alpha)?;
    print_summary(&report);
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn check(suite: &str) -> Result<bool> {
    let results = run_suite(suite)?;
    let mut all = true;
    for r in &results {
        println!("{}", r.line());
        all &= r.passed;
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    Ok(all)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            reps,
            seed,
            out,
            jobs,
        } => run(config, reps, seed, out, jobs).map(|_| true),
        Command::Plot { input, out, alpha } => (|| {
            if !(alpha > 0.0 && alpha < 1.0) {
                bail!("alpha must lie in (0, 1), got {alpha}");
            }
            let report = read_report(&input).with_context(|| format!("reading {}", input.display()))?;
            emit_plot(&report, &out, alpha)?;
            println!("wrote {}", out.display());
            Ok(true)
        })(),
        Command::Check { suite } => check(&suite),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
