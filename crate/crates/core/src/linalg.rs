//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used by the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Symmetrizes `m` in place-free fashion: `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `sigma^{-1/2}` for a symmetric positive-definite matrix.
pub fn inv_sqrt_spd(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::Numeric("expected a square matrix".into()));
    }
    let eig = SymmetricEigen::new(symmetrize(sigma));
    let smallest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::NotPositiveDefinite { eigenvalue: smallest });
    }
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|v| 1.0 / v.sqrt()),
    );
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&scaled) * q.transpose())
}

/// Lower Cholesky factor, or the offending smallest eigenvalue.
pub fn cholesky_lower(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match nalgebra::Cholesky::new(symmetrize(sigma)) {
        Some(chol) => Ok(chol.l()),
        None => Err(Error::NotPositiveDefinite {
            eigenvalue: min_eigenvalue(sigma),
        }),
    }
}

/// Equicorrelation matrix: ones on the diagonal, `rho` elsewhere.
pub fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

/// Least-squares fit through the Moore–Penrose pseudo-inverse of a design
/// matrix, computed from its thin SVD.
#[derive(Debug, Clone)]
pub struct PinvFit {
    /// `X^+ y`.
    pub coef: DVector<f64>,
    /// `V diag(1/s)` restricted to retained singular values; `g(x) = |x^T W|^2`.
    pub leverage_map: DMatrix<f64>,
    pub rank: usize,
    pub n: usize,
    /// In-sample residuals `y - X X^+ y`; exactly zero when the rank equals `n`.
    pub residuals: DVector<f64>,
}

impl PinvFit {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let (n, d) = x.shape();
        let svd = x.clone().svd(true, true);
        let u = svd.u.expect("svd computed with u");
        let v_t = svd.v_t.expect("svd computed with v_t");
        let s_max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| s_max > 0.0 && svd.singular_values[i] > PINV_RCOND * s_max)
            .collect();
        let rank = keep.len();

        let mut coef = DVector::zeros(d);
        let mut leverage_map = DMatrix::zeros(d, rank);
        for (col, &i) in keep.iter().enumerate() {
            let s = svd.singular_values[i];
            let v = v_t.row(i).transpose();
            let uty = u.column(i).dot(y);
            coef += &v * (uty / s);
            leverage_map.set_column(col, &(v / s));
        }
        // With rank n the column space is all of R^n and the fit interpolates.
        let residuals = if rank >= n {
            DVector::zeros(n)
        } else {
            y - x * &coef
        };
        Self {
            coef,
            leverage_map,
            rank,
            n,
            residuals,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.coef.iter()).map(|(a, b)| a * b).sum()
    }

    /// `x^T (X^T X)^+ x`.
    pub fn leverage(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        (self.leverage_map.transpose() * xv).norm_squared()
    }
}
