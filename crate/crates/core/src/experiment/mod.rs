//! Monte Carlo experiment harness.
//!
//! Each `(repetition, dimension)` cell draws its own data from a dedicated
//! random stream, so the report is identical for any worker count. Rows are
//! ordered by repetition, then method (config order), then dimension.

mod config;
mod plot;
mod report;
mod scenario;

use std::collections::HashMap;

pub use config::{ExperimentConfig, Method, Scenario};
pub use plot::{emit_plot, render_svg};
pub use report::{emit_csv, parse_report, read_report, write_csv, AGGREGATE_HEADER, ROW_HEADER};

use crate::data::{load_csv, Dataset};
use crate::error::{Error, Result};
use crate::exec;

/// One method evaluated on one repetition at one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    /// Zero-based repetition index.
    pub rep: usize,
    pub method: Method,
    pub d: usize,
    /// Fraction of test points inside the set.
    pub coverage: f64,
    /// Mean width over the test covariates.
    pub width: f64,
    pub threshold: f64,
    /// Selected candidate: penalty, bandwidth, menu label or weight norm.
    pub chosen: String,
    pub runtime_ms: f64,
    /// Set when the method failed on this repetition.
    pub error: Option<String>,
}

impl ExperimentRow {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

/// Mean and standard error over the successful rows of one `(method, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub d: usize,
    /// Number of successful rows.
    pub n: usize,
    pub mean_coverage: f64,
    pub se_coverage: f64,
    pub mean_width: f64,
    pub se_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn from_rows(rows: Vec<ExperimentRow>) -> Self {
        let aggregates = aggregate(&rows);
        Self { rows, aggregates }
    }

    pub fn aggregate_for(&self, method: Method, d: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.d == d)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ExperimentRow> + '_ {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

/// `(mean, sd / sqrt(n))` with the `n - 1` sample deviation; NaN when
/// `values` is empty, standard error NaN when it has one entry.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates in order of first appearance of `method`, then ascending `d`.
pub fn aggregate(rows: &[ExperimentRow]) -> Vec<Aggregate> {
    let mut methods: Vec<Method> = Vec::new();
    let mut dims: Vec<usize> = Vec::new();
    let mut groups: HashMap<(Method, usize), (Vec<f64>, Vec<f64>)> = HashMap::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !dims.contains(&r.d) {
            dims.push(r.d);
        }
        let g = groups.entry((r.method, r.d)).or_default();
        if !r.is_error() {
            g.0.push(r.coverage);
            g.1.push(r.width);
        }
    }
    dims.sort_unstable();
    let mut out = Vec::new();
    for &m in &methods {
        for &d in &dims {
            if let Some((cov, wid)) = groups.get(&(m, d)) {
                let (mean_coverage, se_coverage) = mean_se(cov);
                let (mean_width, se_width) = mean_se(wid);
                out.push(Aggregate {
                    method: m,
                    d,
                    n: cov.len(),
                    mean_coverage,
                    se_coverage,
                    mean_width,
                    se_width,
                });
            }
        }
    }
    out
}

/// Where each repetition's data comes from.
pub(crate) enum Source {
    Synthetic,
    Table(Dataset),
}

/// Runs every `(repetition, dimension)` cell on the current thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (source, dims) = match &config.csv_path {
        Some(path) => {
            let table = load_csv(path, &config.response_column)?;
            if table.len() < config.n_train + config.n_test {
                return Err(Error::config(format!(
                    "{} has {} rows, fewer than n_train + n_test = {}",
                    path.display(),
                    table.len(),
                    config.n_train + config.n_test
                )));
            }
            let d = table.dim();
            (Source::Table(table), vec![d])
        }
        None => (Source::Synthetic, config.dims.clone()),
    };

    let cells = config.reps * dims.len();
    let results: Vec<Vec<ExperimentRow>> = exec::map_indices(cells, |c| {
        let (rep, di) = (c / dims.len(), c % dims.len());
        scenario::run_cell(config, &source, rep, di, dims[di])
    });

    let mut rows = Vec::with_capacity(cells * config.methods.len());
    for rep in 0..config.reps {
        for m in 0..config.methods.len() {
            for di in 0..dims.len() {
                rows.push(results[rep * dims.len() + di][m].clone());
            }
        }
    }
    Ok(ExperimentReport::from_rows(rows))
}

/// [`run_experiment`] on a dedicated pool of `jobs` workers.
pub fn run_experiment_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    exec::with_workers(jobs, || run_experiment(config))
}
