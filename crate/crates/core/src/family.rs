//! Nested prediction-set families.
//!
//! A family is an increasing collection of sets `{F_t}` indexed by a real
//! threshold. It is fully described by its conformal score
//! `score(z) = inf { t : z in F_t }` (so `z in F_t` iff `score(z) <= t`) and
//! a width functional giving the size of `F_t`.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Point predictor `x -> m(x)`.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F> Predictor for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// `x -> theta^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub theta: Vec<f64>,
}

impl LinearPredictor {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }
}

impl Predictor for LinearPredictor {
    fn predict(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.theta).map(|(a, b)| a * b).sum()
    }
}

/// A threshold-indexed nested family of sets.
///
/// Regression families read a point as `(x, y)`. Unsupervised families
/// (density level sets) treat `x` as the observation and ignore `y`.
pub trait NestedFamily: Send + Sync {
    /// Smallest threshold whose set contains the point; `+inf` if none does.
    fn score(&self, x: &[f64], y: f64) -> f64;

    /// Width of the set at `threshold`. `reference` supplies the covariate
    /// sample used by families whose width averages over `x`.
    fn width_at(&self, threshold: f64, reference: &Dataset) -> Result<f64>;

    fn label(&self) -> String;

    fn scores(&self, data: &Dataset) -> Vec<f64> {
        data.iter().map(|(x, y)| self.score(x, y)).collect()
    }
}

/// A family together with a calibrated threshold.
#[derive(Clone)]
pub struct PredictionSet {
    pub family: Arc<dyn NestedFamily>,
    pub threshold: f64,
    pub width: f64,
}

impl PredictionSet {
    /// Builds the set and evaluates its width against `reference`.
    pub fn new(family: Arc<dyn NestedFamily>, threshold: f64, reference: &Dataset) -> Result<Self> {
        let width = family.width_at(threshold, reference)?;
        Ok(Self {
            family,
            threshold,
            width,
        })
    }

    pub fn contains(&self, x: &[f64], y: f64) -> bool {
        self.family.score(x, y) <= self.threshold
    }

    pub fn label(&self) -> String {
        self.family.label()
    }
}

impl fmt::Debug for PredictionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictionSet")
            .field("family", &self.family.label())
            .field("threshold", &self.threshold)
            .field("width", &self.width)
            .finish()
    }
}

// ---------------------------------------------------------------------------
// Fixed width

/// `F_t = { (x, y) : |y - m(x)| <= t }`, width `2t`.
pub struct FixedWidthFamily<P> {
    predictor: P,
    label: String,
}

impl<P: Predictor> FixedWidthFamily<P> {
    pub fn new(predictor: P, label: impl Into<String>) -> Self {
        Self {
            predictor,
            label: label.into(),
        }
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }
}

impl<P: Predictor> NestedFamily for FixedWidthFamily<P> {
    fn score(&self, x: &[f64], y: f64) -> f64 {
        (y - self.predictor.predict(x)).abs()
    }

    fn width_at(&self, threshold: f64, _reference: &Dataset) -> Result<f64> {
        Ok(if threshold > 0.0 { 2.0 * threshold } else { 0.0 })
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

pub fn fixed_width_family<P: Predictor>(predictor: P) -> FixedWidthFamily<P> {
    FixedWidthFamily::new(predictor, "fixed-width")
}

/// Fixed-width family around `theta^T x`; needs no training data.
pub fn linear_theta_family(theta: Vec<f64>) -> FixedWidthFamily<LinearPredictor> {
    FixedWidthFamily::new(LinearPredictor::new(theta), "linear")
}

// ---------------------------------------------------------------------------
// Conformalized quantile regression

/// Estimated conditional quantiles at one covariate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileBand {
    pub lo: f64,
    pub hi: f64,
    pub med: Option<f64>,
}

/// Source of lower/upper (and optionally median) conditional quantiles.
pub trait ConditionalQuantiles: Send + Sync {
    fn band(&self, x: &[f64]) -> QuantileBand;
    fn has_median(&self) -> bool;
}

type QuantileFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Quantile estimates given as plain functions.
#[derive(Clone)]
pub struct QuantilePair {
    pub q_lo: QuantileFn,
    pub q_hi: QuantileFn,
    pub q_med: Option<QuantileFn>,
}

impl QuantilePair {
    pub fn new(
        q_lo: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        q_hi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            q_lo: Arc::new(q_lo),
            q_hi: Arc::new(q_hi),
            q_med: None,
        }
    }

    pub fn with_median(mut self, q_med: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.q_med = Some(Arc::new(q_med));
        self
    }
}

impl ConditionalQuantiles for QuantilePair {
    fn band(&self, x: &[f64]) -> QuantileBand {
        QuantileBand {
            lo: (self.q_lo)(x),
            hi: (self.q_hi)(x),
            med: self.q_med.as_ref().map(|f| f(x)),
        }
    }

    fn has_median(&self) -> bool {
        self.q_med.is_some()
    }
}

/// The three quantile-based nested families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CqrVariant {
    /// Additive inflation of `[q_lo, q_hi]`.
    V1,
    /// Inflation proportional to the distances to the median.
    V2,
    /// Inflation proportional to `q_hi - q_lo`.
    V3,
}

impl fmt::Display for CqrVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CqrVariant::V1 => "V1",
            CqrVariant::V2 => "V2",
            CqrVariant::V3 => "V3",
        };
        f.write_str(s)
    }
}

pub struct CqrFamily {
    variant: CqrVariant,
    quantiles: Arc<dyn ConditionalQuantiles>,
    label: String,
    warned: AtomicBool,
}

impl CqrFamily {
    pub fn variant(&self) -> CqrVariant {
        self.variant
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn degenerate(&self) {
        if !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!(
                "{}: degenerate quantile band (zero denominator); scoring such points as +inf",
                self.label
            );
        }
    }

    /// Length of the x-cross-section at `threshold`, or `None` where the
    /// band is degenerate (the cross-section is then empty for finite
    /// thresholds).
    fn cross_section(&self, band: &QuantileBand, threshold: f64) -> Option<f64> {
        let gap = band.hi - band.lo;
        let len = match self.variant {
            CqrVariant::V1 => gap + 2.0 * threshold,
            CqrVariant::V2 => {
                let med = band.med?;
                if !(med - band.lo > 0.0 && band.hi - med > 0.0) {
                    return None;
                }
                (1.0 + threshold) * gap
            }
            CqrVariant::V3 => {
                if !(gap > 0.0) {
                    return None;
                }
                (1.0 + 2.0 * threshold) * gap
            }
        };
        Some(len.max(0.0))
    }
}

impl NestedFamily for CqrFamily {
    fn score(&self, x: &[f64], y: f64) -> f64 {
        let b = self.quantiles.band(x);
        match self.variant {
            CqrVariant::V1 => (b.lo - y).max(y - b.hi),
            CqrVariant::V2 => {
                let med = match b.med {
                    Some(m) => m,
                    None => return f64::INFINITY,
                };
                let (below, above) = (med - b.lo, b.hi - med);
                if !(below > 0.0 && above > 0.0) {
                    self.degenerate();
                    return f64::INFINITY;
                }
                ((b.lo - y) / below).max((y - b.hi) / above)
            }
            CqrVariant::V3 => {
                let gap = b.hi - b.lo;
                if !(gap > 0.0) {
                    self.degenerate();
                    return f64::INFINITY;
                }
                ((b.lo - y) / gap).max((y - b.hi) / gap)
            }
        }
    }

    fn width_at(&self, threshold: f64, reference: &Dataset) -> Result<f64> {
        if threshold == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        if reference.is_empty() {
            return Err(Error::UnsupportedWidth(
                "quantile-band width needs a nonempty reference sample".into(),
            ));
        }
        let total: f64 = reference
            .rows()
            .map(|x| {
                let band = self.quantiles.band(x);
                self.cross_section(&band, threshold).unwrap_or(0.0)
            })
            .sum();
        Ok(total / reference.len() as f64)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Quantile-band family of the given variant. `V2` needs a median estimate.
pub fn cqr_family(variant: CqrVariant, quantiles: Arc<dyn ConditionalQuantiles>) -> Result<CqrFamily> {
    if variant == CqrVariant::V2 && !quantiles.has_median() {
        return Err(Error::config("the V2 quantile family needs a median estimate"));
    }
    Ok(CqrFamily {
        variant,
        quantiles,
        label: format!("cqr-{variant}"),
        warned: AtomicBool::new(false),
    })
}

// ---------------------------------------------------------------------------
// Density level sets

/// Axis-aligned integration box for level-set volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SupportBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::config("support box bounds must have equal, positive length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::config("support box needs lower < upper on every axis"));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Bounding box of `data` padded by `pad` on every side.
    pub fn around(data: &Dataset, pad: f64) -> Result<Self> {
        let d = data.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for row in data.rows() {
            for j in 0..d {
                lower[j] = lower[j].min(row[j]);
                upper[j] = upper[j].max(row[j]);
            }
        }
        Self::new(
            lower.iter().map(|v| v - pad).collect(),
            upper.iter().map(|v| v + pad).collect(),
        )
    }
}

/// Default number of midpoint cells per axis.
pub const DEFAULT_GRID_RESOLUTION: usize = 512;

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `F_t = { z : 1 / p(z) <= t }` with Lebesgue-measure width.
pub struct DensityLevelFamily {
    density: DensityFn,
    support: SupportBox,
    resolution: usize,
    label: String,
    // midpoint densities sorted in decreasing order, filled on first use
    grid: OnceLock<Vec<f64>>,
}

impl DensityLevelFamily {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    fn cell_volume(&self) -> f64 {
        self.support
            .lower
            .iter()
            .zip(&self.support.upper)
            .map(|(l, u)| (u - l) / self.resolution as f64)
            .product()
    }

    fn sorted_grid(&self) -> &[f64] {
        self.grid.get_or_init(|| {
            let r = self.resolution;
            let sb = &self.support;
            let step: Vec<f64> = sb
                .lower
                .iter()
                .zip(&sb.upper)
                .map(|(l, u)| (u - l) / r as f64)
                .collect();
            let mid = |axis: usize, i: usize| sb.lower[axis] + (i as f64 + 0.5) * step[axis];
            let mut values = match sb.dim() {
                1 => (0..r).map(|i| (self.density)(&[mid(0, i)])).collect::<Vec<_>>(),
                _ => {
                    let mut v = Vec::with_capacity(r * r);
                    for i in 0..r {
                        for j in 0..r {
                            v.push((self.density)(&[mid(0, i), mid(1, j)]));
                        }
                    }
                    v
                }
            };
            values.sort_by(|a, b| b.total_cmp(a));
            values
        })
    }
}

impl NestedFamily for DensityLevelFamily {
    fn score(&self, x: &[f64], _y: f64) -> f64 {
        let p = (self.density)(x);
        if p > 0.0 {
            1.0 / p
        } else {
            f64::INFINITY
        }
    }

    fn width_at(&self, threshold: f64, _reference: &Dataset) -> Result<f64> {
        if self.support.dim() > 2 {
            return Err(Error::UnsupportedWidth(format!(
                "level-set volume is only computed for dimension <= 2, got {}",
                self.support.dim()
            )));
        }
        if threshold == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        if !(threshold > 0.0) {
            return Ok(0.0);
        }
        let level = 1.0 / threshold;
        let grid = self.sorted_grid();
        let inside = grid.partition_point(|&p| p >= level);
        Ok(inside as f64 * self.cell_volume())
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Level sets of `density`, with volumes integrated over `support` using
/// `resolution` midpoint cells per axis.
pub fn density_level_family(
    density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    support: SupportBox,
    resolution: usize,
) -> DensityLevelFamily {
    DensityLevelFamily {
        density: Arc::new(density),
        support,
        resolution: resolution.max(1),
        label: "density-level".into(),
        grid: OnceLock::new(),
    }
}
