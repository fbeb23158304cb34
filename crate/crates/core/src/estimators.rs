//! Trainable components consumed by the selection routines (Gaussian kernel
//! density estimates, nearest-neighbour conditional quantiles) and the two
//! least-squares baseline intervals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use crate::conformal::{check_alpha, conformal_quantile};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::{ConditionalQuantiles, Predictor, QuantileBand};
use crate::linalg::PinvFit;

// ---------------------------------------------------------------------------
// Kernel density estimation

/// Gaussian kernel density estimate
/// `p(z) = 1 / (n h^d) * sum_i K((z - Z_i) / h)`.
#[derive(Debug, Clone)]
pub struct KdeModel {
    bandwidth: f64,
    points: Vec<f64>,
    d: usize,
    norm: f64,
}

pub fn kde_fit(points: &Dataset, bandwidth: f64) -> Result<KdeModel> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::config(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if points.is_empty() {
        return Err(Error::config("kernel density estimate needs at least one point"));
    }
    let d = points.dim();
    let norm = 1.0 / (points.len() as f64 * bandwidth.powi(d as i32) * (2.0 * PI).powf(d as f64 / 2.0));
    Ok(KdeModel {
        bandwidth,
        points: points.covariates().to_vec(),
        d,
        norm,
    })
}

impl KdeModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let inv = 1.0 / (self.bandwidth * self.bandwidth);
        let sum: f64 = self
            .points
            .chunks_exact(self.d)
            .map(|p| {
                let r2: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * r2 * inv).exp()
            })
            .sum();
        self.norm * sum
    }
}

pub fn kde_eval(model: &KdeModel, z: &[f64]) -> f64 {
    model.eval(z)
}

// ---------------------------------------------------------------------------
// Nearest-neighbour conditional quantiles

/// Rank `ceil(k * beta)` clamped to `1..=k`.
pub fn quantile_rank(k: usize, beta: f64) -> usize {
    let x = k as f64 * beta;
    ((x - x.abs() * 1e-12).ceil().max(1.0) as usize).min(k)
}

/// Brute-force Euclidean neighbour search with a per-query cache.
///
/// Neighbour lists are computed once for `max_k` and served as prefixes to
/// every smaller `k`, so a menu of models sharing one index pays for each
/// query point once.
pub struct KnnIndex {
    data: Dataset,
    max_k: usize,
    cache: RwLock<HashMap<Vec<u64>, Arc<[usize]>>>,
}

impl KnnIndex {
    pub fn new(data: Dataset, max_k: usize) -> Result<Self> {
        if max_k == 0 || max_k > data.len() {
            return Err(Error::config(format!(
                "neighbour count {max_k} must lie in 1..={}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            max_k,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn max_k(&self) -> usize {
        self.max_k
    }

    /// The `max_k` nearest training indices ordered by (distance, index).
    pub fn neighbors(&self, x: &[f64]) -> Arc<[usize]> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return hit;
        }
        let mut order: Vec<(f64, usize)> = self
            .data
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.max_k < order.len() {
            order.select_nth_unstable_by(self.max_k - 1, cmp);
            order.truncate(self.max_k);
        }
        order.sort_unstable_by(cmp);
        let found: Arc<[usize]> = order.into_iter().map(|(_, i)| i).collect();
        if let Ok(mut c) = self.cache.write() {
            c.insert(key, found.clone());
        }
        found
    }
}

/// Conditional quantiles from the responses of the `k` nearest neighbours.
#[derive(Clone)]
pub struct KnnQuantileModel {
    index: Arc<KnnIndex>,
    k: usize,
}

pub fn knn_quantile_fit(data: &Dataset, k: usize) -> Result<KnnQuantileModel> {
    KnnQuantileModel::new(Arc::new(KnnIndex::new(data.clone(), k)?), k)
}

impl KnnQuantileModel {
    /// Model sharing an existing index; `k` may not exceed the index's `max_k`.
    pub fn new(index: Arc<KnnIndex>, k: usize) -> Result<Self> {
        if k == 0 || k > index.max_k() {
            return Err(Error::config(format!(
                "k = {k} must lie in 1..={}",
                index.max_k()
            )));
        }
        Ok(Self { index, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbour responses in ascending order.
    pub fn neighbor_responses(&self, x: &[f64]) -> Vec<f64> {
        let nb = self.index.neighbors(x);
        let data = self.index.data();
        let mut ys: Vec<f64> = nb[..self.k].iter().map(|&i| data.response(i)).collect();
        ys.sort_by(f64::total_cmp);
        ys
    }

    pub fn predict_quantile(&self, x: &[f64], beta: f64) -> f64 {
        let ys = self.neighbor_responses(x);
        ys[quantile_rank(self.k, beta) - 1]
    }

    /// Lower/upper band at levels `beta` and `1 - beta`, with the median.
    pub fn band(&self, beta: f64) -> KnnBand {
        KnnBand {
            model: self.clone(),
            beta,
        }
    }
}

pub fn predict_quantile(model: &KnnQuantileModel, x: &[f64], beta: f64) -> f64 {
    model.predict_quantile(x, beta)
}

/// [`ConditionalQuantiles`] view of a kNN model at a fixed `beta`.
#[derive(Clone)]
pub struct KnnBand {
    model: KnnQuantileModel,
    beta: f64,
}

impl KnnBand {
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl ConditionalQuantiles for KnnBand {
    fn band(&self, x: &[f64]) -> QuantileBand {
        let ys = self.model.neighbor_responses(x);
        let k = self.model.k;
        QuantileBand {
            lo: ys[quantile_rank(k, self.beta) - 1],
            hi: ys[quantile_rank(k, 1.0 - self.beta) - 1],
            med: Some(ys[quantile_rank(k, 0.5) - 1]),
        }
    }

    fn has_median(&self) -> bool {
        true
    }
}

/// kNN median as a point predictor.
impl Predictor for KnnQuantileModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_quantile(x, 0.5)
    }
}

/// Equispaced `count` levels on `[lo, hi]`, each clamped to `(0, 0.49]`.
/// The flag reports whether any level was clamped.
pub fn beta_grid(lo: f64, hi: f64, count: usize) -> (Vec<f64>, bool) {
    let mut clamped = false;
    let grid = (0..count)
        .map(|i| {
            let b = if count == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            };
            let c = b.clamp(f64::MIN_POSITIVE, 0.49);
            clamped |= c != b;
            c
        })
        .collect();
    (grid, clamped)
}

// ---------------------------------------------------------------------------
// Baselines

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Gaussian-theory interval around the least-squares fit.
    LinearGaussian,
    /// In-sample residual quantile around the least-squares fit.
    Naive,
}

/// Interval `|y - x^T b| <= half_width(x)` around the pseudo-inverse
/// least-squares coefficients `b`.
#[derive(Debug, Clone)]
pub struct BaselineInterval {
    pub kind: BaselineKind,
    fit: PinvFit,
    /// `sigma_hat * z_{alpha/2}` for the Gaussian interval, `T_alpha` for naive.
    pub scale: f64,
}

impl BaselineInterval {
    pub fn center(&self, x: &[f64]) -> f64 {
        self.fit.predict(x)
    }

    pub fn half_width(&self, x: &[f64]) -> f64 {
        match self.kind {
            BaselineKind::LinearGaussian => {
                if self.scale == 0.0 {
                    0.0
                } else {
                    self.scale * (1.0 + self.fit.leverage(x)).sqrt()
                }
            }
            BaselineKind::Naive => self.scale,
        }
    }

    pub fn contains(&self, x: &[f64], y: f64) -> bool {
        (y - self.center(x)).abs() <= self.half_width(x)
    }

    /// Average of `2 * half_width(x)` over `reference`.
    pub fn mean_width(&self, reference: &Dataset) -> f64 {
        if reference.is_empty() {
            return f64::NAN;
        }
        reference.rows().map(|x| 2.0 * self.half_width(x)).sum::<f64>() / reference.len() as f64
    }

    pub fn coverage(&self, test: &Dataset) -> f64 {
        if test.is_empty() {
            return f64::NAN;
        }
        test.iter().filter(|(x, y)| self.contains(x, *y)).count() as f64 / test.len() as f64
    }

    pub fn rank(&self) -> usize {
        self.fit.rank
    }
}

/// Gaussian-theory interval
/// `|y - x^T b| <= sigma_hat z_{alpha/2} sqrt(1 + x^T (X^T X)^+ x)` with
/// `sigma_hat^2 = |Y - X b|^2 / N`.
pub fn linear_gaussian_interval(data: &Dataset, alpha: f64) -> Result<BaselineInterval> {
    check_alpha(alpha)?;
    let fit = PinvFit::new(&data.design_matrix(), &data.response_vector());
    let sigma = (fit.residuals.norm_squared() / data.len() as f64).sqrt();
    let z = normal_quantile(1.0 - alpha / 2.0);
    Ok(BaselineInterval {
        kind: BaselineKind::LinearGaussian,
        scale: sigma * z,
        fit,
    })
}

/// Naive interval whose half-width is the `ceil((1 - alpha)(N + 1))`-th
/// smallest in-sample absolute residual.
pub fn naive_interval(data: &Dataset, alpha: f64) -> Result<BaselineInterval> {
    let fit = PinvFit::new(&data.design_matrix(), &data.response_vector());
    let abs: Vec<f64> = fit.residuals.iter().map(|r| r.abs()).collect();
    let t = conformal_quantile(&abs, alpha)?.threshold;
    Ok(BaselineInterval {
        kind: BaselineKind::Naive,
        scale: t,
        fit,
    })
}
