use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use super::{ExperimentConfig, ExperimentRow, Method, Scenario, Source};
use crate::conformal::{efcp, vfcp};
use crate::data::{even_sizes, split_with, stream_rng, Dataset, StreamRng};
use crate::error::{Error, Result};
use crate::estimators::{
    beta_grid, kde_fit, linear_gaussian_interval, naive_interval, BaselineInterval, KnnIndex, KnnQuantileModel,
};
use crate::family::{
    cqr_family, density_level_family, LinearPredictor, NestedFamily, PredictionSet, Predictor, SupportBox,
};
use crate::linalg::min_eigenvalue;
use crate::linear::{aggregate_features, ef_lin, select_theta_with, vf_lin, SearchOptions, ThetaDomain};
use crate::ridge::{
    ef_ridge, extend_negative, fit_ridge_path, gram, linspace, select_lambda, vf_ridge, RidgePath,
};
use crate::synth::{self, SyntheticConfig};

/// Penalties of the ridge members in the aggregation menu.
const AGGREGATION_LAMBDAS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
/// Neighbour counts of the kNN-median members in the aggregation menu.
const AGGREGATION_KS: [usize; 2] = [5, 20];

struct Outcome {
    coverage: f64,
    width: f64,
    threshold: f64,
    chosen: String,
}

/// Both fold layouts of one repetition's training sample.
struct Folds {
    halves: [Dataset; 2],
    thirds: [Dataset; 3],
    search_seed: u64,
}

pub(super) fn run_cell(cfg: &ExperimentConfig, source: &Source, rep: usize, di: usize, d: usize) -> Vec<ExperimentRow> {
    let mut rng = stream_rng(cfg.seed, ((rep as u64) << 16) | di as u64);
    let prepared = draw(cfg, source, d, &mut rng).and_then(|(train, test)| {
        let folds = folds(cfg, &train, &mut rng)?;
        Ok((train, test, folds))
    });
    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = match &prepared {
                Ok((train, test, folds)) => run_method(cfg, method, train, test, folds),
                Err(e) => Err(Error::Numeric(e.to_string())),
            };
            let runtime_ms = if cfg.record_runtime {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            match outcome {
                Ok(o) => ExperimentRow {
                    rep,
                    method,
                    d,
                    coverage: o.coverage,
                    width: o.width,
                    threshold: o.threshold,
                    chosen: o.chosen,
                    runtime_ms,
                    error: None,
                },
                Err(e) => {
                    log::warn!("rep {rep}, {method}, d = {d}: {e}");
                    ExperimentRow {
                        rep,
                        method,
                        d,
                        coverage: f64::NAN,
                        width: f64::NAN,
                        threshold: f64::NAN,
                        chosen: String::new(),
                        runtime_ms,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

fn draw(cfg: &ExperimentConfig, source: &Source, d: usize, rng: &mut StreamRng) -> Result<(Dataset, Dataset)> {
    match source {
        Source::Table(table) => {
            let n = cfg.n_train + cfg.n_test;
            let idx = rand::seq::index::sample(rng, table.len(), n).into_vec();
            Ok((table.subset(&idx[..cfg.n_train]), table.subset(&idx[cfg.n_train..])))
        }
        Source::Synthetic => match cfg.scenario {
            Scenario::DensityLevel => {
                let sigma = DMatrix::identity(d, d);
                let train = synth::sample_mvt(cfg.n_train, cfg.nu, &sigma, rng)?;
                let test = synth::sample_mvt(cfg.n_test, cfg.nu, &sigma, rng)?;
                Ok((Dataset::from_points(train, d)?, Dataset::from_points(test, d)?))
            }
            scenario => {
                let base = match scenario {
                    Scenario::RidgePoisson | Scenario::CqrPoisson => SyntheticConfig::nonlinear_poisson,
                    _ => SyntheticConfig::linear_t,
                };
                let synth_cfg = SyntheticConfig {
                    rho: cfg.rho,
                    ..base(d, cfg.nu, cfg.n_train, cfg.n_test, cfg.seed)
                };
                synth::generate_with(&synth_cfg, rng)
            }
        },
    }
}

fn folds(cfg: &ExperimentConfig, train: &Dataset, rng: &mut StreamRng) -> Result<Folds> {
    let n = train.len();
    let halves = split_with(n, &even_sizes(n, 2), cfg.seed, rng)?.apply(train);
    let thirds = split_with(n, &even_sizes(n, 3), cfg.seed, rng)?.apply(train);
    let search_seed = rng.random();
    let [h1, h2]: [Dataset; 2] = halves.try_into().expect("two parts");
    let [t1, t2, t3]: [Dataset; 3] = thirds.try_into().expect("three parts");
    Ok(Folds {
        halves: [h1, h2],
        thirds: [t1, t2, t3],
        search_seed,
    })
}

fn run_method(cfg: &ExperimentConfig, method: Method, train: &Dataset, test: &Dataset, f: &Folds) -> Result<Outcome> {
    match method {
        Method::Linear => baseline(linear_gaussian_interval(train, cfg.alpha)?, test),
        Method::Naive => baseline(naive_interval(train, cfg.alpha)?, test),
        Method::Efcp => {
            let [d1, d2] = &f.halves;
            match cfg.scenario {
                Scenario::RidgeLinearT | Scenario::RidgePoisson => {
                    let path = ridge_path(cfg, d1)?;
                    let sel = select_lambda(&path, d2, cfg.alpha)?;
                    evaluate(&ef_ridge(&sel), test, fmt_num(sel.lambda_hat))
                }
                Scenario::CqrPoisson | Scenario::DensityLevel => {
                    let (menu, labels) = menu(cfg, d1)?;
                    let sel = efcp(&menu, d2, cfg.alpha)?;
                    evaluate(&sel.efcp_set, test, labels[sel.chosen_index].clone())
                }
                Scenario::LinearAggregation => {
                    let mus = aggregation_members(cfg, d1)?;
                    let z2 = aggregate_features(&mus, d2)?;
                    let sel = select_theta_with(
                        &ThetaDomain::simplex(mus.len())?,
                        &z2,
                        cfg.alpha,
                        &search_options(cfg, f),
                    )?;
                    let norm = sel.theta_hat.iter().map(|t| t * t).sum::<f64>().sqrt();
                    evaluate(&ef_lin(&sel), &aggregate_features(&mus, test)?, fmt_num(norm))
                }
            }
        }
        Method::Vfcp => {
            let [d1, d2, d3] = &f.thirds;
            match cfg.scenario {
                Scenario::RidgeLinearT | Scenario::RidgePoisson => {
                    let path = ridge_path(cfg, d1)?;
                    let mut sel = select_lambda(&path, d2, cfg.alpha)?;
                    let set = vf_ridge(&mut sel, &path, d3, cfg.alpha)?;
                    evaluate(&set, test, fmt_num(sel.lambda_hat))
                }
                Scenario::CqrPoisson | Scenario::DensityLevel => {
                    let (menu, labels) = menu(cfg, d1)?;
                    let sel = vfcp(&menu, d2, d3, cfg.alpha)?;
                    let set = sel.vfcp_set.as_ref().expect("vfcp sets the recalibrated set");
                    evaluate(set, test, labels[sel.chosen_index].clone())
                }
                Scenario::LinearAggregation => {
                    let mus = aggregation_members(cfg, d1)?;
                    let z2 = aggregate_features(&mus, d2)?;
                    let mut sel = select_theta_with(
                        &ThetaDomain::simplex(mus.len())?,
                        &z2,
                        cfg.alpha,
                        &search_options(cfg, f),
                    )?;
                    let set = vf_lin(&mut sel, &aggregate_features(&mus, d3)?, cfg.alpha)?;
                    let norm = sel.theta_hat.iter().map(|t| t * t).sum::<f64>().sqrt();
                    evaluate(&set, &aggregate_features(&mus, test)?, fmt_num(norm))
                }
            }
        }
    }
}

fn search_options(cfg: &ExperimentConfig, f: &Folds) -> SearchOptions {
    SearchOptions {
        budget: cfg.search_budget,
        seed: f.search_seed,
        ..SearchOptions::default()
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn evaluate(set: &PredictionSet, test: &Dataset, chosen: String) -> Result<Outcome> {
    let hits = test.iter().filter(|(x, y)| set.contains(x, *y)).count();
    Ok(Outcome {
        coverage: hits as f64 / test.len() as f64,
        width: set.family.width_at(set.threshold, test)?,
        threshold: set.threshold,
        chosen,
    })
}

fn baseline(interval: BaselineInterval, test: &Dataset) -> Result<Outcome> {
    Ok(Outcome {
        coverage: interval.coverage(test),
        width: interval.mean_width(test),
        threshold: interval.scale,
        chosen: format!("rank={}", interval.rank()),
    })
}

fn ridge_path(cfg: &ExperimentConfig, d1: &Dataset) -> Result<RidgePath> {
    let mut grid = linspace(0.0, cfg.lambda_max, cfg.lambda_count);
    if cfg.negative_lambdas {
        let (sigma_hat, _) = gram(d1);
        grid = extend_negative(&grid, min_eigenvalue(&sigma_hat), cfg.kappa, (cfg.lambda_count / 10).max(1));
    }
    fit_ridge_path(d1, &grid, cfg.kappa)
}

type Menu = (Vec<Arc<dyn NestedFamily>>, Vec<String>);

fn menu(cfg: &ExperimentConfig, d1: &Dataset) -> Result<Menu> {
    match cfg.scenario {
        Scenario::DensityLevel => density_menu(cfg, d1),
        _ => cqr_menu(cfg, d1),
    }
}

/// Variants x neighbour counts x quantile levels, all sharing one index.
fn cqr_menu(cfg: &ExperimentConfig, d1: &Dataset) -> Result<Menu> {
    let max_k = cfg.k_grid.iter().copied().max().unwrap_or(1);
    let index = Arc::new(KnnIndex::new(d1.clone(), max_k)?);
    let (betas, clamped) = beta_grid(1e-4 * cfg.alpha, 4.0 * cfg.alpha, cfg.beta_count);
    if clamped {
        log::debug!("quantile levels above 0.49 were clamped");
    }
    let mut families: Vec<Arc<dyn NestedFamily>> = Vec::new();
    let mut labels = Vec::new();
    for &variant in &cfg.variants {
        for &k in &cfg.k_grid {
            let model = KnnQuantileModel::new(index.clone(), k)?;
            for &beta in &betas {
                let label = format!("{variant}/k={k}/beta={beta}");
                let fam = cqr_family(variant, Arc::new(model.band(beta)))?.with_label(label.clone());
                families.push(Arc::new(fam));
                labels.push(label);
            }
        }
    }
    Ok((families, labels))
}

/// Geometric bandwidth grid with ratio `sqrt(2)` centred on the
/// normal-reference rule `sd * n^(-1/(d+4))`.
pub(crate) fn bandwidth_grid(cfg: &ExperimentConfig, data: &Dataset) -> Vec<f64> {
    if !cfg.bandwidths.is_empty() {
        return cfg.bandwidths.clone();
    }
    let (n, d) = (data.len(), data.dim());
    let sd = (0..d)
        .map(|j| {
            let col: Vec<f64> = data.rows().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / n as f64;
            (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n.max(2) - 1) as f64).sqrt()
        })
        .sum::<f64>()
        / d as f64;
    let base = sd.max(1e-8) * (n as f64).powf(-1.0 / (d as f64 + 4.0));
    let k = cfg.bandwidth_count;
    (0..k)
        .map(|i| base * 2f64.powf((i as f64 - (k as f64 - 1.0) / 2.0) / 2.0))
        .collect()
}

fn density_menu(cfg: &ExperimentConfig, d1: &Dataset) -> Result<Menu> {
    let mut families: Vec<Arc<dyn NestedFamily>> = Vec::new();
    let mut labels = Vec::new();
    for h in bandwidth_grid(cfg, d1) {
        let kde = kde_fit(d1, h)?;
        let support = SupportBox::around(d1, 6.0 * h)?;
        let fam = density_level_family(move |z: &[f64]| kde.eval(z), support, cfg.grid_resolution)
            .with_label(format!("h={h}"));
        families.push(Arc::new(fam));
        labels.push(fmt_num(h));
    }
    Ok((families, labels))
}

/// Ridge fits at a few penalties plus kNN medians, all trained on `d1`.
fn aggregation_members(cfg: &ExperimentConfig, d1: &Dataset) -> Result<Vec<Arc<dyn Predictor>>> {
    let path = fit_ridge_path(d1, &AGGREGATION_LAMBDAS, cfg.kappa)?;
    let mut mus: Vec<Arc<dyn Predictor>> = path
        .betas
        .iter()
        .map(|b| Arc::new(LinearPredictor::new(b.iter().copied().collect())) as Arc<dyn Predictor>)
        .collect();
    let max_k = AGGREGATION_KS.iter().copied().max().unwrap_or(1).min(d1.len());
    let index = Arc::new(KnnIndex::new(d1.clone(), max_k)?);
    for k in AGGREGATION_KS {
        mus.push(Arc::new(KnnQuantileModel::new(index.clone(), k.min(max_k))?));
    }
    Ok(mus)
}
