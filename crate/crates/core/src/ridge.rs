//! Ridge-path conformal selection, plus the population-level quantities used
//! to check the deterministic ridge error bound.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::conformal::efcp;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::{linear_theta_family, NestedFamily, PredictionSet};
use crate::linalg::{inv_sqrt_spd, sym_eigenvalues, sym_op_norm, symmetrize};

/// Largest condition number of `sigma_hat + lambda I` accepted by the solver.
pub const MAX_CONDITION: f64 = 1e12;

/// Default penalty when extending the grid below zero.
pub const DEFAULT_KAPPA: f64 = 0.5;

/// 100 equispaced penalties on `[0, 200]`.
pub fn default_lambda_grid() -> Vec<f64> {
    linspace(0.0, 200.0, 100)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Prepends `count` equispaced negative penalties on `[-kappa * lambda_min, 0)`.
pub fn extend_negative(grid: &[f64], lambda_min_sigma_hat: f64, kappa: f64, count: usize) -> Vec<f64> {
    let floor = -kappa * lambda_min_sigma_hat.max(0.0);
    let mut out: Vec<f64> = if floor < 0.0 {
        (0..count).map(|i| floor * (1.0 - i as f64 / count as f64)).collect()
    } else {
        Vec::new()
    };
    out.extend_from_slice(grid);
    out
}

/// `(X^T X / n, X^T Y / n)`.
pub fn gram(data: &Dataset) -> (DMatrix<f64>, DVector<f64>) {
    let x = data.design_matrix();
    let n = data.len().max(1) as f64;
    let sigma = symmetrize(&(x.transpose() * &x / n));
    let gamma = x.transpose() * data.response_vector() / n;
    (sigma, gamma)
}

/// A penalty that could not be solved.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFailure {
    pub lambda: f64,
    pub reason: String,
}

/// Ridge coefficients `(sigma_hat + lambda I)^{-1} gamma_hat` along a grid.
#[derive(Debug, Clone)]
pub struct RidgePath {
    /// Ascending penalties that were solved.
    pub lambdas: Vec<f64>,
    pub betas: Vec<DVector<f64>>,
    pub sigma_hat: DMatrix<f64>,
    pub gamma_hat: DVector<f64>,
    pub lambda_min_sigma_hat: f64,
    pub kappa: f64,
    /// Penalties below `-kappa * lambda_min_sigma_hat`.
    pub dropped: Vec<f64>,
    pub failures: Vec<RidgeFailure>,
}

impl RidgePath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `|(sigma_hat + lambda I) beta - gamma_hat| / |gamma_hat|` for entry `i`.
    pub fn stationarity_residual(&self, i: usize) -> f64 {
        let a = shifted(&self.sigma_hat, self.lambdas[i]);
        let r = (a * &self.betas[i] - &self.gamma_hat).norm();
        let g = self.gamma_hat.norm();
        if g > 0.0 {
            r / g
        } else {
            r
        }
    }

    pub fn families(&self) -> Vec<Arc<dyn NestedFamily>> {
        self.betas
            .iter()
            .map(|b| Arc::new(linear_theta_family(b.iter().copied().collect())) as Arc<dyn NestedFamily>)
            .collect()
    }
}

fn shifted(sigma: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let d = sigma.nrows();
    sigma + DMatrix::identity(d, d) * lambda
}

pub fn fit_ridge_path(d1: &Dataset, lambdas: &[f64], kappa: f64) -> Result<RidgePath> {
    if !(kappa < 1.0) {
        return Err(Error::config(format!("kappa must be below 1, got {kappa}")));
    }
    if lambdas.is_empty() {
        return Err(Error::config("penalty grid is empty"));
    }
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::config("penalty grid must be finite"));
    }
    let (sigma_hat, gamma_hat) = gram(d1);
    let eig = sym_eigenvalues(&sigma_hat);
    let lambda_min = eig[0];
    let lambda_max = eig[eig.len() - 1];
    let floor = -kappa * lambda_min;

    let mut grid = lambdas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut path = RidgePath {
        lambdas: Vec::with_capacity(grid.len()),
        betas: Vec::with_capacity(grid.len()),
        lambda_min_sigma_hat: lambda_min,
        kappa,
        dropped: Vec::new(),
        failures: Vec::new(),
        sigma_hat,
        gamma_hat,
    };
    for lambda in grid {
        if lambda < floor {
            path.dropped.push(lambda);
            continue;
        }
        let lo = lambda_min + lambda;
        let hi = lambda_max + lambda;
        if !(lo > 0.0) || hi / lo > MAX_CONDITION {
            path.failures.push(RidgeFailure {
                lambda,
                reason: format!("condition number {:.3e} exceeds limit", hi / lo),
            });
            continue;
        }
        match solve_spd(&shifted(&path.sigma_hat, lambda), &path.gamma_hat) {
            Some(beta) => {
                path.lambdas.push(lambda);
                path.betas.push(beta);
            }
            None => path.failures.push(RidgeFailure {
                lambda,
                reason: "factorization failed".into(),
            }),
        }
    }
    if !path.dropped.is_empty() {
        log::debug!(
            "dropped {} penalties below -kappa * lambda_min = {floor:.4e}",
            path.dropped.len()
        );
    }
    for f in &path.failures {
        log::warn!("ridge solve skipped at lambda = {}: {}", f.lambda, f.reason);
    }
    Ok(path)
}

/// Cholesky solve with one step of iterative refinement.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = nalgebra::Cholesky::new(a.clone())?;
    let mut x = chol.solve(b);
    let r = b - a * &x;
    x += chol.solve(&r);
    Some(x)
}

#[derive(Debug, Clone)]
pub struct RidgeSelection {
    pub lambda_hat: f64,
    /// Position of `lambda_hat` within the path.
    pub index: usize,
    pub beta_hat: DVector<f64>,
    /// Half-width of `beta_hat` on the selection fold.
    pub t_alpha: f64,
    /// Half-width recalibrated on a third fold, once [`vf_ridge`] has run.
    pub t_alpha_star: Option<f64>,
    /// Selection-fold half-width for every path entry.
    pub thresholds: Vec<f64>,
}

/// Calibrates every path entry on `d2` and keeps the narrowest (smallest
/// penalty on ties).
pub fn select_lambda(path: &RidgePath, d2: &Dataset, alpha: f64) -> Result<RidgeSelection> {
    if path.is_empty() {
        return Err(Error::Numeric("ridge path has no solvable penalty".into()));
    }
    let sel = efcp(&path.families(), d2, alpha)?;
    let i = sel.chosen_index;
    Ok(RidgeSelection {
        lambda_hat: path.lambdas[i],
        index: i,
        beta_hat: path.betas[i].clone(),
        t_alpha: sel.candidate_thresholds[i],
        t_alpha_star: None,
        thresholds: sel.candidate_thresholds,
    })
}

fn ridge_set(beta: &DVector<f64>, threshold: f64) -> PredictionSet {
    PredictionSet {
        family: Arc::new(linear_theta_family(beta.iter().copied().collect())),
        threshold,
        width: if threshold > 0.0 { 2.0 * threshold } else { 0.0 },
    }
}

/// Efficiency-first set around `beta_hat`.
pub fn ef_ridge(selection: &RidgeSelection) -> PredictionSet {
    ridge_set(&selection.beta_hat, selection.t_alpha)
}

/// Validity-first set: `beta_hat` recalibrated on `d3`.
pub fn vf_ridge(selection: &mut RidgeSelection, path: &RidgePath, d3: &Dataset, alpha: f64) -> Result<PredictionSet> {
    let beta = &path.betas[selection.index];
    let scores: Vec<f64> = d3
        .iter()
        .map(|(x, y)| (y - x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>()).abs())
        .collect();
    let t = crate::conformal::conformal_quantile(&scores, alpha)?.threshold;
    selection.t_alpha_star = Some(t);
    Ok(ridge_set(beta, t))
}

/// Known population second moments of a synthetic model.
#[derive(Debug, Clone)]
pub struct PopulationOracle {
    /// `E[X X^T]`.
    pub sigma: DMatrix<f64>,
    /// `E[X Y]`.
    pub gamma: DVector<f64>,
    /// `E[Y^2]`, when known.
    pub y_second_moment: Option<f64>,
}

impl PopulationOracle {
    /// `(sigma + lambda I)^{-1} gamma`.
    pub fn beta_star(&self, lambda: f64) -> Result<DVector<f64>> {
        let a = shifted(&self.sigma, lambda);
        nalgebra::Cholesky::new(a)
            .map(|c| c.solve(&self.gamma))
            .ok_or_else(|| Error::Numeric(format!("sigma + {lambda} I is not positive definite")))
    }
}

/// `|sigma^{-1/2} sigma_hat sigma^{-1/2} - I|` in operator norm.
pub fn d_sigma(sigma_hat: &DMatrix<f64>, sigma_true: &DMatrix<f64>) -> Result<f64> {
    let r = inv_sqrt_spd(sigma_true)?;
    let d = sigma_true.nrows();
    Ok(sym_op_norm(&symmetrize(&(&r * sigma_hat * &r - DMatrix::identity(d, d)))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeBoundEntry {
    pub lambda: f64,
    /// `|beta_hat - beta_star|` in the `sigma` norm.
    pub lhs: f64,
    /// The bound; `+inf` when vacuous.
    pub rhs: f64,
    pub vacuous: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeBoundReport {
    pub c: f64,
    pub d_sigma: f64,
    pub entries: Vec<RidgeBoundEntry>,
    /// `(|sigma^{-1/2} gamma|, sqrt(E[Y^2]))` when the second moment is known.
    pub ky: Option<(f64, f64)>,
}

impl RidgeBoundReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.holds).count()
            + usize::from(self.ky.is_some_and(|(a, b)| a > b * (1.0 + BOUND_SLACK) + BOUND_SLACK))
    }

    pub fn holds(&self) -> bool {
        self.violations() == 0
    }
}

/// Arithmetic slack allowed when comparing the two sides.
pub const BOUND_SLACK: f64 = 1e-8;

/// Checks, for every path entry,
/// `|beta_hat - beta_star|_sigma <= (|sigma^{-1/2}(gamma_hat - gamma)| + D |sigma^{-1/2} gamma| / (1 - c)) / (1 - c - D)`
/// where `D = d_sigma(sigma_hat, sigma)`. The bound is vacuous (and passes)
/// when `1 - c - D <= 0`.
pub fn check_ridge_inequality(path: &RidgePath, oracle: &PopulationOracle, c: f64) -> Result<RidgeBoundReport> {
    if !(c <= 1.0) {
        return Err(Error::config(format!("c must be at most 1, got {c}")));
    }
    let lambda_min = sym_eigenvalues(&oracle.sigma)[0];
    if let Some(l) = path.lambdas.iter().find(|&&l| l < -c * lambda_min) {
        return Err(Error::config(format!(
            "penalty {l} is below -c * lambda_min(sigma) = {}",
            -c * lambda_min
        )));
    }
    let r = inv_sqrt_spd(&oracle.sigma)?;
    let d = d_sigma(&path.sigma_hat, &oracle.sigma)?;
    let noise = (&r * (&path.gamma_hat - &oracle.gamma)).norm();
    let signal = (&r * &oracle.gamma).norm();
    let denom = 1.0 - c - d;

    let mut entries = Vec::with_capacity(path.len());
    for (lambda, beta) in path.lambdas.iter().zip(&path.betas) {
        let diff = beta - oracle.beta_star(*lambda)?;
        let lhs = diff.dot(&(&oracle.sigma * &diff)).max(0.0).sqrt();
        let vacuous = !(denom > 0.0);
        let rhs = if vacuous {
            f64::INFINITY
        } else {
            let bias = if d == 0.0 { 0.0 } else { d * signal / (1.0 - c) };
            (noise + bias) / denom
        };
        entries.push(RidgeBoundEntry {
            lambda: *lambda,
            lhs,
            rhs,
            vacuous,
            holds: vacuous || lhs <= rhs + BOUND_SLACK * (1.0 + rhs),
        });
    }
    Ok(RidgeBoundReport {
        c,
        d_sigma: d,
        entries,
        ky: oracle.y_second_moment.map(|m| (signal, m.max(0.0).sqrt())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{stream_rng, StreamRng};
    use crate::linalg::cholesky_lower;
    use crate::linear::t_alpha_theta;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_design(rng: &mut StreamRng, sigma: &DMatrix<f64>, beta: &DVector<f64>, n: usize) -> Dataset {
        let d = sigma.nrows();
        let l = cholesky_lower(sigma).unwrap();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let row = &l * z;
            y.push(row.dot(beta) + rng.sample::<f64, _>(StandardNormal));
            x.extend(row.iter());
        }
        Dataset::new(x, d, y).unwrap()
    }

    fn random_instance(rng: &mut StreamRng) -> (PopulationOracle, DVector<f64>, usize) {
        let d = rng.random_range(1..=5);
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
        let beta = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let gamma = &sigma * &beta;
        let ey2 = beta.dot(&(&sigma * &beta)) + 1.0;
        let n = rng.random_range(5..=200);
        (
            PopulationOracle {
                sigma,
                gamma,
                y_second_moment: Some(ey2),
            },
            beta,
            n,
        )
    }

    #[test]
    fn scalar_ridge_closed_form() {
        let data = Dataset::new(vec![1.0], 1, vec![2.0]).unwrap();
        let path = fit_ridge_path(&data, &[0.0, 1.0, 3.0], 0.5).unwrap();
        for (l, b) in path.lambdas.iter().zip(&path.betas) {
            assert!((b[0] - 2.0 / (1.0 + l)).abs() < 1e-14);
        }
        assert!((path.betas[1][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero_and_zero_penalty_is_ols() {
        let mut rng = stream_rng(1, 0);
        let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5]);
        let beta = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let data = gaussian_design(&mut rng, &sigma, &beta, 60);
        let path = fit_ridge_path(&data, &[0.0, 1e6], 0.5).unwrap();
        assert!(path.betas[1].norm() <= path.gamma_hat.norm() / 1e6 + 1e-15);
        let ols = crate::linear::ols(&data);
        for (a, b) in path.betas[0].iter().zip(&ols) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn stationarity_shrinkage_and_continuity() {
        let mut rng = stream_rng(2, 0);
        let sigma = crate::linalg::equicorrelation(6, 0.5);
        let beta = DVector::from_fn(6, |i, _| 1.0 + i as f64);
        let data = gaussian_design(&mut rng, &sigma, &beta, 40);
        let grid = default_lambda_grid();
        let path = fit_ridge_path(&data, &grid, 0.5).unwrap();
        assert_eq!(path.len(), 100);
        for i in 0..path.len() {
            assert!(path.stationarity_residual(i) <= 1e-8);
        }
        for w in path.betas.windows(2) {
            assert!(w[1].norm() <= w[0].norm() + 1e-12);
        }
        for i in 1..path.len() {
            let dl = path.lambdas[i] - path.lambdas[i - 1];
            let lo = path.lambda_min_sigma_hat + path.lambdas[i - 1];
            let step = (&path.betas[i] - &path.betas[i - 1]).norm();
            assert!(step <= 10.0 * dl * path.betas[i - 1].norm() / lo);
        }
    }

    #[test]
    fn grid_floor_and_argument_checks() {
        let data = Dataset::new(vec![1.0, 0.0, 0.0, 2.0], 2, vec![1.0, 1.0]).unwrap();
        // sigma_hat = diag(0.5, 2), lambda_min = 0.5
        let path = fit_ridge_path(&data, &[-1.0, -0.2, 0.0], 0.5).unwrap();
        assert_eq!(path.dropped, vec![-1.0]);
        assert_eq!(path.lambdas, vec![-0.2, 0.0]);
        assert!(fit_ridge_path(&data, &[], 0.5).is_err());
        assert!(fit_ridge_path(&data, &[0.0], 1.0).is_err());
        let ext = extend_negative(&[0.0, 1.0], 0.5, 0.5, 4);
        assert_eq!(ext.len(), 6);
        assert!((ext[0] + 0.25).abs() < 1e-15);
        assert!(ext[3] < 0.0);
    }

    #[test]
    fn singular_penalty_is_skipped() {
        let data = Dataset::new(vec![1.0, 1.0], 2, vec![1.0]).unwrap();
        let path = fit_ridge_path(&data, &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(path.lambdas, vec![1.0]);
        assert_eq!(path.failures.len(), 1);
    }

    #[test]
    fn selection_examples() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let data = Dataset::new(x, 1, y).unwrap();
        let (d1, d2) = (data.subset(&(0..15).collect::<Vec<_>>()), data.subset(&(15..30).collect::<Vec<_>>()));
        let path = fit_ridge_path(&d1, &[0.0, 0.5, 1.0], 0.5).unwrap();
        let sel = select_lambda(&path, &d2, 0.1).unwrap();
        assert_eq!(sel.lambda_hat, 0.0);
        assert!(sel.t_alpha < 1e-12);

        let path = fit_ridge_path(&d1, &[0.7], 0.5).unwrap();
        assert_eq!(select_lambda(&path, &d2, 0.1).unwrap().lambda_hat, 0.7);
    }

    #[test]
    fn selection_agrees_with_direct_per_candidate_calibration() {
        let mut rng = stream_rng(5, 0);
        let sigma = crate::linalg::equicorrelation(4, 0.3);
        let beta = DVector::from_column_slice(&[1.0, 0.0, -1.0, 2.0]);
        let d1 = gaussian_design(&mut rng, &sigma, &beta, 30);
        let d2 = gaussian_design(&mut rng, &sigma, &beta, 30);
        let path = fit_ridge_path(&d1, &linspace(0.0, 20.0, 21), 0.5).unwrap();
        let sel = select_lambda(&path, &d2, 0.1).unwrap();
        let direct: Vec<f64> = path
            .betas
            .iter()
            .map(|b| t_alpha_theta(b.as_slice(), &d2, 0.1).unwrap())
            .collect();
        assert_eq!(sel.thresholds, direct);
        let min = direct.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(ef_ridge(&sel).width, 2.0 * min);
        assert_eq!(direct.iter().position(|&t| t == min), Some(sel.index));
    }

    #[test]
    fn vf_ridge_recalibrates() {
        let mut rng = stream_rng(6, 0);
        let sigma = DMatrix::identity(2, 2);
        let beta = DVector::from_column_slice(&[1.0, 1.0]);
        let d1 = gaussian_design(&mut rng, &sigma, &beta, 40);
        let d2 = gaussian_design(&mut rng, &sigma, &beta, 40);
        let d3 = gaussian_design(&mut rng, &sigma, &beta, 4000);
        let path = fit_ridge_path(&d1, &[0.0, 1.0], 0.5).unwrap();
        let mut sel = select_lambda(&path, &d2, 0.1).unwrap();
        let set = vf_ridge(&mut sel, &path, &d3, 0.1).unwrap();
        assert_eq!(sel.t_alpha_star, Some(set.threshold));
        // noise is N(0, 1) plus a small fit error: T* is near z_{0.95}
        assert!((set.threshold - 1.645).abs() < 0.25, "{}", set.threshold);

        let one = gaussian_design(&mut rng, &sigma, &beta, 1);
        assert_eq!(vf_ridge(&mut sel, &path, &one, 0.1).unwrap().threshold, f64::INFINITY);
    }

    #[test]
    fn d_sigma_examples() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(d_sigma(&s, &s).unwrap() < 1e-12);
        assert!((d_sigma(&(&s * 2.0), &s).unwrap() - 1.0).abs() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(d_sigma(&s, &bad).is_err());

        let mut rng = stream_rng(7, 0);
        let sigma = crate::linalg::equicorrelation(5, 0.4);
        let data = gaussian_design(&mut rng, &sigma, &DVector::zeros(5), 10_000);
        let (sh, _) = gram(&data);
        assert!(d_sigma(&sh, &sigma).unwrap() < 0.2);
    }

    #[test]
    fn bound_is_tight_without_estimation_error() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let gamma = DVector::from_column_slice(&[1.0, -1.0]);
        let data = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], 2, vec![0.0, 0.0]).unwrap();
        let mut path = fit_ridge_path(&data, &[0.0, 1.0], 0.5).unwrap();
        path.sigma_hat = sigma.clone();
        path.gamma_hat = gamma.clone();
        path.betas = path
            .lambdas
            .iter()
            .map(|l| solve_spd(&shifted(&sigma, *l), &gamma).unwrap())
            .collect();
        let oracle = PopulationOracle {
            sigma,
            gamma,
            y_second_moment: None,
        };
        let report = check_ridge_inequality(&path, &oracle, 0.0).unwrap();
        assert!(report.d_sigma < 1e-12);
        for e in &report.entries {
            assert!(e.lhs < 1e-12 && e.rhs < 1e-12 && e.holds);
        }
    }

    #[test]
    fn bound_holds_on_random_instances() {
        let mut rng = stream_rng(8, 0);
        let mut vacuous = 0;
        for _ in 0..1000 {
            let (oracle, beta, n) = random_instance(&mut rng);
            let data = gaussian_design(&mut rng, &oracle.sigma, &beta, n);
            let lmin = sym_eigenvalues(&oracle.sigma)[0];
            let c = 0.5;
            let grid = vec![-c * lmin, 0.0, 0.5, 2.0, 10.0];
            let path = fit_ridge_path(&data, &grid, 0.5).unwrap();
            let report = check_ridge_inequality(&path, &oracle, c).unwrap();
            assert!(report.holds(), "{report:?}");
            vacuous += report.entries.iter().filter(|e| e.vacuous).count();
        }
        assert!(vacuous < 5000);
    }

    #[test]
    fn bound_rejects_penalties_below_floor() {
        let (oracle, beta, _) = random_instance(&mut stream_rng(9, 0));
        let data = gaussian_design(&mut stream_rng(9, 1), &oracle.sigma, &beta, 50);
        let lmin = sym_eigenvalues(&oracle.sigma)[0];
        let path = fit_ridge_path(&data, &[-0.9 * lmin], 0.95).unwrap();
        if !path.is_empty() {
            assert!(check_ridge_inequality(&path, &oracle, 0.5).is_err());
        }
        assert!(check_ridge_inequality(&path, &oracle, 1.5).is_err());
    }
}
