use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::family::CqrVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Ridge menu on the heavy-tailed linear model.
    RidgeLinearT,
    /// Ridge menu on the nonlinear Poisson model.
    RidgePoisson,
    /// Conformalized quantile regression menu on the Poisson model.
    CqrPoisson,
    /// Kernel density level sets over a bandwidth grid.
    DensityLevel,
    /// Simplex-weighted aggregation of ridge and kNN predictors.
    LinearAggregation,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::RidgeLinearT,
        Scenario::RidgePoisson,
        Scenario::CqrPoisson,
        Scenario::DensityLevel,
        Scenario::LinearAggregation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::RidgeLinearT => "RidgeLinearT",
            Scenario::RidgePoisson => "RidgePoisson",
            Scenario::CqrPoisson => "CqrPoisson",
            Scenario::DensityLevel => "DensityLevel",
            Scenario::LinearAggregation => "LinearAggregation",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Efcp,
    Vfcp,
    Linear,
    Naive,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Efcp, Method::Vfcp, Method::Linear, Method::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Method::Efcp => "EFCP",
            Method::Vfcp => "VFCP",
            Method::Linear => "Linear",
            Method::Naive => "Naive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

/// Full description of a Monte Carlo experiment.
///
/// Text form is one `key = value` per line with `#` comments; list values
/// are comma separated. See [`ExperimentConfig::parse`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub alpha: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Strictly increasing covariate dimensions.
    pub dims: Vec<usize>,
    pub nu: f64,
    pub rho: f64,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub lambda_max: f64,
    pub lambda_count: usize,
    /// Prepend penalties down to `-kappa * lambda_min(sigma_hat)`.
    pub negative_lambdas: bool,
    pub kappa: f64,
    pub k_grid: Vec<usize>,
    pub beta_count: usize,
    pub variants: Vec<CqrVariant>,
    /// Explicit bandwidths; empty selects a data-driven geometric grid.
    pub bandwidths: Vec<f64>,
    pub bandwidth_count: usize,
    pub grid_resolution: usize,
    pub search_budget: usize,
    /// Real-data mode: draw `n_train + n_test` rows per repetition from this file.
    pub csv_path: Option<PathBuf>,
    pub response_column: String,
    /// Record wall-clock time per row; off keeps the CSV reproducible.
    pub record_runtime: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::RidgeLinearT,
            alpha: 0.1,
            n_train: 200,
            n_test: 100,
            dims: vec![10],
            nu: 3.0,
            rho: 0.5,
            reps: 100,
            methods: Method::ALL.to_vec(),
            seed: 1,
            output_dir: PathBuf::from("out"),
            lambda_max: 200.0,
            lambda_count: 100,
            negative_lambdas: false,
            kappa: 0.5,
            k_grid: vec![5, 10, 20, 40],
            beta_count: 10,
            variants: vec![CqrVariant::V1, CqrVariant::V2, CqrVariant::V3],
            bandwidths: Vec::new(),
            bandwidth_count: 10,
            grid_resolution: crate::family::DEFAULT_GRID_RESOLUTION,
            search_budget: 400,
            csv_path: None,
            response_column: "y".into(),
            record_runtime: false,
        }
    }
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, T::Err> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

fn parse_variant(s: &str) -> Result<CqrVariant> {
    match s.to_ascii_uppercase().as_str() {
        "V1" => Ok(CqrVariant::V1),
        "V2" => Ok(CqrVariant::V2),
        "V3" => Ok(CqrVariant::V3),
        _ => Err(Error::config(format!("unknown CQR variant '{s}'"))),
    }
}

impl ExperimentConfig {
    /// Parses the text form on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::config(format!("invalid {what} '{value}'"));
        match key {
            "scenario" => self.scenario = value.parse()?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "n_train" => self.n_train = value.parse().map_err(|_| bad("n_train"))?,
            "n_test" => self.n_test = value.parse().map_err(|_| bad("n_test"))?,
            "d" | "dims" => self.dims = list(value).map_err(|_| bad("dimension list"))?,
            "nu" => self.nu = value.parse().map_err(|_| bad("nu"))?,
            "rho" => self.rho = value.parse().map_err(|_| bad("rho"))?,
            "reps" => self.reps = value.parse().map_err(|_| bad("reps"))?,
            "methods" => self.methods = list(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "lambda_max" => self.lambda_max = value.parse().map_err(|_| bad("lambda_max"))?,
            "lambda_count" => self.lambda_count = value.parse().map_err(|_| bad("lambda_count"))?,
            "negative_lambdas" => self.negative_lambdas = parse_bool(value).ok_or_else(|| bad("boolean"))?,
            "kappa" => self.kappa = value.parse().map_err(|_| bad("kappa"))?,
            "k_grid" => self.k_grid = list(value).map_err(|_| bad("k grid"))?,
            "beta_count" => self.beta_count = value.parse().map_err(|_| bad("beta_count"))?,
            "variants" => {
                self.variants = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_variant)
                    .collect::<Result<_>>()?
            }
            "bandwidths" => self.bandwidths = list(value).map_err(|_| bad("bandwidth list"))?,
            "bandwidth_count" => self.bandwidth_count = value.parse().map_err(|_| bad("bandwidth_count"))?,
            "grid_resolution" => self.grid_resolution = value.parse().map_err(|_| bad("grid_resolution"))?,
            "search_budget" => self.search_budget = value.parse().map_err(|_| bad("search_budget"))?,
            "csv_path" => self.csv_path = Some(PathBuf::from(value)),
            "response_column" => self.response_column = value.to_string(),
            "record_runtime" => self.record_runtime = parse_bool(value).ok_or_else(|| bad("boolean"))?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return fail("methods must not repeat".into());
        }
        if self.dims.is_empty() {
            return fail("at least one dimension is required".into());
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) || self.dims[0] == 0 {
            return fail("dimensions must be positive and strictly increasing".into());
        }
        if self.n_train < 6 {
            return fail("n_train must be at least 6 to allow a three-way split".into());
        }
        if self.n_test == 0 {
            return fail("n_test must be positive".into());
        }
        if self.csv_path.is_none() && !(self.nu > 2.0) {
            return fail(format!("nu must exceed 2, got {}", self.nu));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.kappa < 1.0) {
            return fail(format!("kappa must be below 1, got {}", self.kappa));
        }
        match self.scenario {
            Scenario::RidgeLinearT | Scenario::RidgePoisson => {
                if self.lambda_count == 0 || !(self.lambda_max >= 0.0) {
                    return fail("ridge grid needs lambda_count >= 1 and lambda_max >= 0".into());
                }
            }
            Scenario::CqrPoisson => {
                if self.k_grid.is_empty() || self.k_grid.contains(&0) || self.beta_count == 0 || self.variants.is_empty() {
                    return fail("CQR menu needs positive k values, beta_count >= 1 and a variant".into());
                }
            }
            Scenario::DensityLevel => {
                if self.methods.iter().any(|m| matches!(m, Method::Linear | Method::Naive)) {
                    return fail("the density scenario supports only EFCP and VFCP".into());
                }
                if self.csv_path.is_some() {
                    return fail("the density scenario draws synthetic data only".into());
                }
                if *self.dims.last().unwrap() > 2 {
                    return fail("the density scenario supports dimensions 1 and 2".into());
                }
                if self.bandwidths.iter().any(|h| !(*h > 0.0)) {
                    return fail("bandwidths must be positive".into());
                }
                if self.bandwidths.is_empty() && self.bandwidth_count == 0 {
                    return fail("bandwidth_count must be positive".into());
                }
            }
            Scenario::LinearAggregation => {
                if self.search_budget == 0 {
                    return fail("search_budget must be positive".into());
                }
            }
        }
        if matches!(self.scenario, Scenario::RidgePoisson | Scenario::CqrPoisson)
            && self.csv_path.is_none()
            && self.dims[0] < 2
        {
            return fail("the Poisson model needs d >= 2".into());
        }
        Ok(())
    }
}
