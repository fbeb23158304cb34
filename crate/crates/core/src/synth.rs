//! Heavy-tailed samplers and the two synthetic regression models.
//!
//! Covariates are drawn from a centred multivariate t distribution
//! `t_d(nu, Sigma)` with `Sigma` the equicorrelation scale matrix, so their
//! covariance is `nu / (nu - 2) * Sigma`.
//!
//! * **Linear-t**: `Y = X beta + xi` with `beta_j = 1 + ((j - 1) mod 5)` and
//!   `xi = t(nu) * (1 + sqrt(X1^2 + X2^2))`.
//! * **Nonlinear Poisson**:
//!   `Y ~ Pois(sin^2(X1) + cos^4(X2) + 0.01) + 0.03 X1 e1 + 25 1{u < 0.01} e2`
//!   where `e_k = t(nu) * (1 + sqrt(X1^(2k) + X2^(2k)))`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal, StudentT};

use crate::data::{stream_rng, Dataset, StreamRng};
use crate::error::{Error, Result};
use crate::linalg;

/// Which generative model to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticModel {
    LinearT,
    NonlinearPoisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub model: SyntheticModel,
    pub d: usize,
    /// Degrees of freedom of the covariate and noise t distributions.
    pub nu: f64,
    /// Off-diagonal entry of the equicorrelation scale matrix.
    pub rho: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Multiplier on every noise term; 0 gives noiseless responses.
    pub noise_scale: f64,
    /// Enables the rare `25 * e2` outlier term of the Poisson model.
    pub outliers: bool,
}

impl SyntheticConfig {
    pub fn linear_t(d: usize, nu: f64, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            model: SyntheticModel::LinearT,
            d,
            nu,
            rho: 0.5,
            n_train,
            n_test,
            seed,
            noise_scale: 1.0,
            outliers: true,
        }
    }

    pub fn nonlinear_poisson(d: usize, nu: f64, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            model: SyntheticModel::NonlinearPoisson,
            ..Self::linear_t(d, nu, n_train, n_test, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 2.0) {
            return Err(Error::config(format!(
                "nu must exceed 2 for a finite covariance, got {}",
                self.nu
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.d == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        if self.model == SyntheticModel::NonlinearPoisson && self.d < 2 {
            return Err(Error::config("the Poisson model needs d >= 2"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::config("noise_scale must be nonnegative"));
        }
        Ok(())
    }

    pub fn scale_matrix(&self) -> DMatrix<f64> {
        linalg::equicorrelation(self.d, self.rho)
    }
}

/// Draws `n` rows from a centred multivariate t with scale matrix `sigma`.
///
/// Each row is `L z * sqrt(nu / w)` with `L L^T = sigma`, `z` standard
/// normal and `w ~ chi^2(nu)`. Returns a row-major buffer.
pub fn sample_mvt<R: Rng + ?Sized>(
    n: usize,
    nu: f64,
    sigma: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(nu > 0.0) {
        return Err(Error::config(format!("nu must be positive, got {nu}")));
    }
    let d = sigma.nrows();
    let chol = linalg::cholesky_lower(sigma)?;
    let chi2 = ChiSquared::new(nu).map_err(|e| Error::config(e.to_string()))?;
    let mut out = Vec::with_capacity(n * d);
    let mut z = DVector::<f64>::zeros(d);
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let w: f64 = chi2.sample(rng);
        let scale = (nu / w).sqrt();
        let row = &chol * &z;
        out.extend(row.iter().map(|v| v * scale));
    }
    Ok(out)
}

/// Coefficients `beta_j = 1 + ((j - 1) mod 5)`, `j = 1..=d`.
pub fn linear_coefficients(d: usize) -> Vec<f64> {
    (0..d).map(|j| 1.0 + (j % 5) as f64).collect()
}

/// Poisson rate `sin^2(x1) + cos^4(x2) + 0.01`.
pub fn poisson_rate(x1: f64, x2: f64) -> f64 {
    x1.sin().powi(2) + x2.cos().powi(4) + 0.01
}

/// Draws `n` observations from the configured model.
pub fn draw(cfg: &SyntheticConfig, n: usize, rng: &mut StreamRng) -> Result<Dataset> {
    cfg.validate()?;
    let x = sample_mvt(n, cfg.nu, &cfg.scale_matrix(), rng)?;
    let t = StudentT::new(cfg.nu).map_err(|e| Error::config(e.to_string()))?;
    let d = cfg.d;
    let mut y = Vec::with_capacity(n);
    match cfg.model {
        SyntheticModel::LinearT => {
            let beta = linear_coefficients(d);
            for row in x.chunks_exact(d) {
                let mean: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let x2 = row.get(1).copied().unwrap_or(0.0);
                let spread = 1.0 + (row[0].powi(2) + x2.powi(2)).sqrt();
                let noise: f64 = t.sample(rng);
                y.push(mean + cfg.noise_scale * noise * spread);
            }
        }
        SyntheticModel::NonlinearPoisson => {
            for row in x.chunks_exact(d) {
                let (x1, x2) = (row[0], row[1]);
                let pois = Poisson::new(poisson_rate(x1, x2))
                    .map_err(|e| Error::Numeric(e.to_string()))?;
                let count: f64 = pois.sample(rng);
                let e1 = t.sample(rng) * (1.0 + (x1.powi(2) + x2.powi(2)).sqrt());
                let e2 = t.sample(rng) * (1.0 + (x1.powi(4) + x2.powi(4)).sqrt());
                let u: f64 = rng.random();
                let outlier = if cfg.outliers && u < 0.01 { 25.0 * e2 } else { 0.0 };
                y.push(count + cfg.noise_scale * (0.03 * x1 * e1 + outlier));
            }
        }
    }
    Dataset::from_parts(x, d, y)
}

/// Train and test draws for `cfg` from an explicit generator.
pub fn generate_with(cfg: &SyntheticConfig, rng: &mut StreamRng) -> Result<(Dataset, Dataset)> {
    let train = draw(cfg, cfg.n_train, rng)?;
    let test = draw(cfg, cfg.n_test, rng)?;
    Ok((train, test))
}

/// Train and test samples from the linear-t model.
pub fn gen_linear_t(cfg: &SyntheticConfig) -> Result<(Dataset, Dataset)> {
    if cfg.model != SyntheticModel::LinearT {
        return Err(Error::config("gen_linear_t needs the LinearT model"));
    }
    generate_with(cfg, &mut stream_rng(cfg.seed, 0))
}

/// Train and test samples from the nonlinear Poisson model.
pub fn gen_nonlinear_poisson(cfg: &SyntheticConfig) -> Result<(Dataset, Dataset)> {
    if cfg.model != SyntheticModel::NonlinearPoisson {
        return Err(Error::config("gen_nonlinear_poisson needs the NonlinearPoisson model"));
    }
    generate_with(cfg, &mut stream_rng(cfg.seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_covariance(x: &[f64], d: usize) -> DMatrix<f64> {
        let n = x.len() / d;
        let mut s = DMatrix::zeros(d, d);
        for row in x.chunks_exact(d) {
            let v = DVector::from_column_slice(row);
            s += &v * v.transpose();
        }
        s / n as f64
    }

    fn rel_spectral_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        linalg::sym_op_norm(&(a - b)) / linalg::sym_op_norm(b)
    }

    #[test]
    fn coefficients_cycle_with_period_five() {
        assert_eq!(linear_coefficients(7), vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 2.0]);
    }

    #[test]
    fn empty_sample_has_no_rows() {
        let mut rng = stream_rng(1, 0);
        let x = sample_mvt(0, 5.0, &DMatrix::identity(3, 3), &mut rng).unwrap();
        assert!(x.is_empty());
    }

    #[test]
    fn non_pd_scale_is_rejected() {
        let mut rng = stream_rng(1, 0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sample_mvt(5, 5.0, &bad, &mut rng),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn t_covariance_is_inflated_scale() {
        let mut rng = stream_rng(11, 0);
        let sigma = DMatrix::identity(2, 2);
        let x = sample_mvt(100_000, 5.0, &sigma, &mut rng).unwrap();
        let expected = &sigma * (5.0 / 3.0);
        assert!(rel_spectral_error(&sample_covariance(&x, 2), &expected) < 0.10);
    }

    #[test]
    fn huge_nu_approaches_gaussian() {
        let mut rng = stream_rng(12, 0);
        let sigma = linalg::equicorrelation(3, 0.5);
        let x = sample_mvt(100_000, 1e6, &sigma, &mut rng).unwrap();
        assert!(rel_spectral_error(&sample_covariance(&x, 3), &sigma) < 0.05);
    }

    #[test]
    fn noiseless_linear_model_is_exact() {
        let mut cfg = SyntheticConfig::linear_t(7, 5.0, 50, 10, 3);
        cfg.noise_scale = 0.0;
        let (train, test) = gen_linear_t(&cfg).unwrap();
        let beta = linear_coefficients(7);
        for data in [&train, &test] {
            for (x, y) in data.iter() {
                let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                assert_eq!(y - fit, 0.0);
            }
        }
    }

    #[test]
    fn ols_recovers_linear_coefficients() {
        let cfg = SyntheticConfig::linear_t(10, 5.0, 100_000, 0, 21);
        let (train, _) = gen_linear_t(&cfg).unwrap();
        let x = train.design_matrix();
        let y = train.response_vector();
        let beta_hat = (x.transpose() * &x)
            .cholesky()
            .unwrap()
            .solve(&(x.transpose() * y));
        for (b, truth) in beta_hat.iter().zip(linear_coefficients(10)) {
            assert!((b - truth).abs() < 0.05, "{b} vs {truth}");
        }
    }

    #[test]
    fn poisson_rate_at_origin() {
        assert!((poisson_rate(0.0, 0.0) - 1.01).abs() < 1e-15);
    }

    #[test]
    fn noiseless_poisson_is_integer_valued() {
        let mut cfg = SyntheticConfig::nonlinear_poisson(3, 3.0, 500, 0, 4);
        cfg.noise_scale = 0.0;
        cfg.outliers = false;
        let (train, _) = gen_nonlinear_poisson(&cfg).unwrap();
        assert!(train.responses().iter().all(|&y| y >= 0.0 && y.fract() == 0.0));
    }

    #[test]
    fn poisson_component_mean_at_origin() {
        let mut rng = stream_rng(5, 0);
        let pois = Poisson::new(poisson_rate(0.0, 0.0)).unwrap();
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| -> f64 { pois.sample(&mut rng) }).sum::<f64>() / n as f64;
        assert!((mean - 1.01).abs() / 1.01 < 0.03);
    }

    #[test]
    fn poisson_model_needs_two_covariates() {
        let cfg = SyntheticConfig::nonlinear_poisson(1, 3.0, 10, 0, 4);
        assert!(gen_nonlinear_poisson(&cfg).is_err());
        let mut cfg = SyntheticConfig::linear_t(3, 2.0, 10, 0, 4);
        assert!(gen_linear_t(&cfg).is_err());
        cfg.nu = 3.0;
        cfg.rho = 1.0;
        assert!(gen_linear_t(&cfg).is_err());
    }
}
