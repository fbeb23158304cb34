//! Split-conformal calibration and width-based selection among candidate
//! families.
//!
//! * [`conformal_quantile`] picks the `r`-th smallest calibration score with
//!   `r = ceil((m + 1)(1 - alpha))`; `+inf` when `r > m`.
//! * [`efcp`] (efficiency first) calibrates every candidate on one fold and
//!   returns the narrowest set. Its width equals the minimum candidate width
//!   exactly; coverage is only approximately `1 - alpha`
//!   (see [`theorem1_slack`]).
//! * [`vfcp`] (validity first) selects as `efcp` does, then recalibrates the
//!   chosen family on a fresh fold, which restores exact `1 - alpha` coverage.

use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::family::{NestedFamily, PredictionSet};

/// Outcome of calibrating one family on one fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    /// The `rank`-th smallest score, or `+inf`.
    pub threshold: f64,
    pub rank: usize,
    /// Number of calibration scores.
    pub m: usize,
    /// Set when no scores were supplied.
    pub empty: bool,
}

/// `ceil((m + 1)(1 - alpha))`, clamped to at least 1.
///
/// The product is nudged down by a few ulps before rounding up so that
/// decimal levels such as `alpha = 0.1` give the exact integer rank.
pub fn conformal_rank(m: usize, alpha: f64) -> usize {
    let x = (m as f64 + 1.0) * (1.0 - alpha);
    let r = (x - x.abs() * 1e-12).ceil();
    (r.max(1.0)) as usize
}

/// Calibrated threshold for `scores` at miscoverage `alpha`.
///
/// NaN scores are treated as `+inf`. Ties keep their sorted position.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    let m = scores.len();
    let rank = conformal_rank(m, alpha);
    if m == 0 {
        log::warn!("calibrating on an empty fold; returning the whole space");
        return Ok(CalibrationResult {
            threshold: f64::INFINITY,
            rank,
            m,
            empty: true,
        });
    }
    if rank > m {
        return Ok(CalibrationResult {
            threshold: f64::INFINITY,
            rank,
            m,
            empty: false,
        });
    }
    let mut sorted: Vec<f64> = scores
        .iter()
        .map(|&s| if s.is_nan() { f64::INFINITY } else { s })
        .collect();
    let (_, kth, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(CalibrationResult {
        threshold: *kth,
        rank,
        m,
        empty: false,
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Coverage slack `(sqrt(log(2K)/2) + 1/3) / sqrt(m2)` for choosing among
/// `k` candidates calibrated on `m2` points.
pub fn theorem1_slack(k: usize, m2: usize) -> f64 {
    let k = k.max(1) as f64;
    let m2 = m2.max(1) as f64;
    (((2.0 * k).ln() / 2.0).sqrt() + 1.0 / 3.0) / m2.sqrt()
}

/// Lower bound `(1 + 1/m2)(1 - alpha) - slack` on the conditional coverage
/// of the efficiency-first set.
pub fn efcp_coverage_bound(k: usize, m2: usize, alpha: f64) -> f64 {
    (1.0 + 1.0 / m2.max(1) as f64) * (1.0 - alpha) - theorem1_slack(k, m2)
}

/// Per-candidate calibration, selection and the returned sets.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub candidate_widths: Vec<f64>,
    pub candidate_thresholds: Vec<f64>,
    /// Zero-based index of the narrowest candidate (lowest index on ties).
    pub chosen_index: usize,
    pub efcp_set: PredictionSet,
    pub vfcp_set: Option<PredictionSet>,
    /// Coverage slack for this menu size and calibration fold.
    pub slack: f64,
    /// Every candidate had infinite width; `chosen_index` is then 0.
    pub all_infinite: bool,
}

impl SelectionResult {
    pub fn k(&self) -> usize {
        self.candidate_widths.len()
    }
}

/// Lowest index attaining the minimum; NaN counts as `+inf`.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Efficiency-first selection over `families`, calibrated on `d2`.
///
/// Widths use `d2`'s covariates as the reference sample.
pub fn efcp(families: &[Arc<dyn NestedFamily>], d2: &Dataset, alpha: f64) -> Result<SelectionResult> {
    check_alpha(alpha)?;
    if families.is_empty() {
        return Err(Error::config("need at least one candidate family"));
    }
    if d2.is_empty() {
        return Err(Error::config("calibration fold is empty"));
    }
    let per_candidate: Vec<Result<(f64, f64)>> = exec::map_indices(families.len(), |k| {
        let fam = &families[k];
        let cal = conformal_quantile(&fam.scores(d2), alpha)?;
        let width = fam.width_at(cal.threshold, d2)?;
        Ok((cal.threshold, width))
    });
    let mut thresholds = Vec::with_capacity(families.len());
    let mut widths = Vec::with_capacity(families.len());
    for r in per_candidate {
        let (t, w) = r?;
        thresholds.push(t);
        widths.push(w);
    }

    let chosen = argmin_first(&widths).unwrap_or(0);
    let all_infinite = widths.iter().all(|w| !(w.is_finite()));
    if all_infinite {
        log::warn!("every candidate set has infinite width; returning the first candidate");
    }
    let efcp_set = PredictionSet {
        family: families[chosen].clone(),
        threshold: thresholds[chosen],
        width: widths[chosen],
    };
    Ok(SelectionResult {
        slack: theorem1_slack(families.len(), d2.len()),
        candidate_widths: widths,
        candidate_thresholds: thresholds,
        chosen_index: chosen,
        efcp_set,
        vfcp_set: None,
        all_infinite,
    })
}

/// Validity-first selection: choose on `d2`, recalibrate on `d3`.
///
/// The recalibrated set's width is still measured against `d2`'s covariates.
pub fn vfcp(
    families: &[Arc<dyn NestedFamily>],
    d2: &Dataset,
    d3: &Dataset,
    alpha: f64,
) -> Result<SelectionResult> {
    let mut result = efcp(families, d2, alpha)?;
    let fam = families[result.chosen_index].clone();
    let cal = conformal_quantile(&fam.scores(d3), alpha)?;
    result.vfcp_set = Some(PredictionSet::new(fam, cal.threshold, d2)?);
    Ok(result)
}

/// Split-conformal set for a single family (`K = 1`).
pub fn split_conformal(family: Arc<dyn NestedFamily>, calibration: &Dataset, alpha: f64) -> Result<PredictionSet> {
    let cal = conformal_quantile(&family.scores(calibration), alpha)?;
    PredictionSet::new(family, cal.threshold, calibration)
}

/// Empirical coverage of a set on held-out data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReport {
    pub coverage: f64,
    pub mean_width: f64,
    pub n_test: usize,
}

pub fn evaluate_coverage(set: &PredictionSet, test: &Dataset) -> Result<CoverageReport> {
    if test.is_empty() {
        return Err(Error::config("test set is empty"));
    }
    let hits = test.iter().filter(|(x, y)| set.contains(x, *y)).count();
    Ok(CoverageReport {
        coverage: hits as f64 / test.len() as f64,
        mean_width: set.width,
        n_test: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{fixed_width_family, linear_theta_family};
    use proptest::prelude::*;

    /// Width is whatever was stored; scores are |y|.
    struct FixedWidths {
        width: f64,
    }

    impl NestedFamily for FixedWidths {
        fn score(&self, _x: &[f64], y: f64) -> f64 {
            y.abs()
        }
        fn width_at(&self, t: f64, _r: &Dataset) -> Result<f64> {
            Ok(if t.is_finite() { self.width } else { f64::INFINITY })
        }
        fn label(&self) -> String {
            format!("w={}", self.width)
        }
    }

    fn dataset(ys: &[f64]) -> Dataset {
        Dataset::new(vec![0.0; ys.len()], 1, ys.to_vec()).unwrap()
    }

    fn one_to(n: usize) -> Vec<f64> {
        (1..=n).map(|v| v as f64).collect()
    }

    #[test]
    fn rank_arithmetic() {
        assert_eq!(conformal_rank(10, 0.1), 10);
        assert_eq!(conformal_rank(4, 0.1), 5);
        assert_eq!(conformal_rank(99, 0.1), 90);
        assert_eq!(conformal_rank(66, 0.1), 61);
        assert_eq!(conformal_rank(1, 0.5), 1);
    }

    #[test]
    fn quantile_examples() {
        let cal = conformal_quantile(&one_to(10), 0.1).unwrap();
        assert_eq!((cal.rank, cal.threshold), (10, 10.0));

        let cal = conformal_quantile(&one_to(4), 0.1).unwrap();
        assert_eq!(cal.threshold, f64::INFINITY);
        assert!(!cal.empty);

        let cal = conformal_quantile(&[2.5; 30], 0.2).unwrap();
        assert_eq!(cal.threshold, 2.5);

        let cal = conformal_quantile(&[], 0.1).unwrap();
        assert!(cal.empty && cal.threshold == f64::INFINITY);

        assert!(conformal_quantile(&[1.0], 0.0).is_err());
        assert!(conformal_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn exactly_rank_scores_at_or_below_threshold() {
        let scores = [0.3, 1.7, 0.1, 0.9, 2.2, 1.1, 0.5, 3.0, 0.05];
        let cal = conformal_quantile(&scores, 0.3).unwrap();
        assert!(cal.rank <= scores.len());
        assert_eq!(scores.iter().filter(|&&s| s <= cal.threshold).count(), cal.rank);
    }

    #[test]
    fn slack_values() {
        let expected = ((4.0f64.ln() / 2.0).sqrt() + 1.0 / 3.0) / 200f64.sqrt();
        assert!((theorem1_slack(2, 200) - expected).abs() < 1e-15);
        assert!((theorem1_slack(2, 200) - 0.0824).abs() < 5e-5);
        assert!((efcp_coverage_bound(2, 200, 0.1) - 0.8221).abs() < 5e-4);
        assert!(theorem1_slack(1, 100_000_000) < 1e-4);
        let big = ((2400f64.ln() / 2.0).sqrt() + 1.0 / 3.0) / 232f64.sqrt();
        assert!((theorem1_slack(1200, 232) - big).abs() < 1e-15);
    }

    #[test]
    fn efcp_picks_narrowest_lowest_index() {
        let fams: Vec<Arc<dyn NestedFamily>> = [3.0, 2.0, 2.5, 2.0]
            .iter()
            .map(|&w| Arc::new(FixedWidths { width: w }) as Arc<dyn NestedFamily>)
            .collect();
        let d2 = dataset(&one_to(20));
        let res = efcp(&fams, &d2, 0.1).unwrap();
        assert_eq!(res.chosen_index, 1);
        assert_eq!(res.efcp_set.width, 2.0);
    }

    #[test]
    fn efcp_with_one_family_is_split_conformal() {
        let fam: Arc<dyn NestedFamily> = Arc::new(linear_theta_family(vec![0.0]));
        let d2 = dataset(&[1.0, -3.0, 2.0, 0.5, 4.0, -0.2, 1.5, 2.5, -1.0]);
        let res = efcp(&[fam.clone()], &d2, 0.2).unwrap();
        let plain = split_conformal(fam, &d2, 0.2).unwrap();
        assert_eq!(res.efcp_set.threshold, plain.threshold);
        assert_eq!(res.efcp_set.width, plain.width);
    }

    #[test]
    fn efcp_all_infinite_flags() {
        let fams: Vec<Arc<dyn NestedFamily>> = vec![
            Arc::new(FixedWidths { width: 1.0 }),
            Arc::new(FixedWidths { width: 2.0 }),
        ];
        let d2 = dataset(&[1.0, 2.0]);
        let res = efcp(&fams, &d2, 0.1).unwrap();
        assert!(res.all_infinite);
        assert_eq!(res.chosen_index, 0);
    }

    #[test]
    fn vfcp_recalibrates_on_third_fold() {
        let fam: Arc<dyn NestedFamily> = Arc::new(fixed_width_family(|_: &[f64]| 0.0));
        let d2 = dataset(&one_to(19));
        let d3 = dataset(&one_to(9).iter().map(|v| v * 10.0).collect::<Vec<_>>());
        let res = vfcp(&[fam], &d2, &d3, 0.1).unwrap();
        let vf = res.vfcp_set.unwrap();
        assert_eq!(res.efcp_set.threshold, 18.0);
        assert_eq!(vf.threshold, 90.0);
        assert_eq!(vf.width, 180.0);

        // a tiny third fold overflows the rank
        let tiny = dataset(&[1.0]);
        let fam: Arc<dyn NestedFamily> = Arc::new(fixed_width_family(|_: &[f64]| 0.0));
        let res = vfcp(&[fam], &d2, &tiny, 0.1).unwrap();
        let vf = res.vfcp_set.unwrap();
        assert_eq!(vf.threshold, f64::INFINITY);
        assert_eq!(evaluate_coverage(&vf, &d2).unwrap().coverage, 1.0);
    }

    #[test]
    fn coverage_counts() {
        let fam: Arc<dyn NestedFamily> = Arc::new(fixed_width_family(|_: &[f64]| 0.0));
        let test = dataset(&[0.5, -0.9, 2.0, 0.1]);
        let set = PredictionSet {
            family: fam.clone(),
            threshold: 1.0,
            width: 2.0,
        };
        assert_eq!(evaluate_coverage(&set, &test).unwrap().coverage, 0.75);
        let all = PredictionSet {
            family: fam.clone(),
            threshold: f64::INFINITY,
            width: f64::INFINITY,
        };
        assert_eq!(evaluate_coverage(&all, &test).unwrap().coverage, 1.0);
        let none = PredictionSet {
            family: fam,
            threshold: f64::NEG_INFINITY,
            width: 0.0,
        };
        assert_eq!(evaluate_coverage(&none, &test).unwrap().coverage, 0.0);
    }

    /// Quantile of an empirical CDF: smallest sample with F >= p.
    fn ecdf_quantile(sorted: &[f64], p: f64) -> f64 {
        let r = ((p * sorted.len() as f64) - 1e-12).ceil().max(1.0) as usize;
        sorted[r.min(sorted.len()) - 1]
    }

    proptest! {
        #[test]
        fn efcp_width_is_min_candidate_width(widths in proptest::collection::vec(0.0..10.0f64, 1..20)) {
            let fams: Vec<Arc<dyn NestedFamily>> = widths
                .iter()
                .map(|&w| Arc::new(FixedWidths { width: w }) as Arc<dyn NestedFamily>)
                .collect();
            let d2 = dataset(&one_to(30));
            let res = efcp(&fams, &d2, 0.1).unwrap();
            let min = res.candidate_widths.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(res.efcp_set.width.to_bits(), min.to_bits());
            prop_assert_eq!(res.candidate_widths[res.chosen_index].to_bits(), min.to_bits());
        }

        #[test]
        fn quantile_nonincreasing_in_alpha(
            scores in proptest::collection::vec(-5.0..5.0f64, 1..60),
            a in 0.01..0.98f64,
            b in 0.01..0.98f64,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let t_lo = conformal_quantile(&scores, lo).unwrap().threshold;
            let t_hi = conformal_quantile(&scores, hi).unwrap().threshold;
            prop_assert!(t_hi <= t_lo);
        }

        /// The empirical quantile of a sample from a parent with L-Lipschitz
        /// quantile function (uniform on [0, L]) is within L * Delta of the
        /// parent quantile, Delta being the Kolmogorov distance; two samples
        /// are then within L * (Delta_a + Delta_b) of each other.
        #[test]
        fn quantiles_are_stable_under_cdf_perturbation(
            ua in proptest::collection::vec(0.0..1.0f64, 5..80),
            ub in proptest::collection::vec(0.0..1.0f64, 5..80),
            p in 0.01..0.99f64,
        ) {
            let lip = 3.0;
            let kolmogorov = |sorted: &[f64]| {
                let n = sorted.len() as f64;
                sorted.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
                    let g = x / lip;
                    acc.max((i as f64 + 1.0) / n - g).max(g - i as f64 / n)
                })
            };
            let draw = |u: &[f64]| {
                let mut v: Vec<f64> = u.iter().map(|&x| lip * x).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let (a, b) = (draw(&ua), draw(&ub));
            let (da, db) = (kolmogorov(&a), kolmogorov(&b));
            let (qa, qb) = (ecdf_quantile(&a, p), ecdf_quantile(&b, p));
            prop_assert!((qa - lip * p).abs() <= lip * da + 1e-12);
            prop_assert!((qa - qb).abs() <= lip * (da + db) + 1e-12);
        }
    }
}
