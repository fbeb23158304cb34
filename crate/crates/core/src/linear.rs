//! Best linear fixed-width prediction: choose `theta` in a bounded set to
//! minimize the calibrated half-width `T(theta)` of `|y - theta^T x|`.
//!
//! `T(theta)` is piecewise constant in the residual ordering and has no
//! useful gradient, so [`select_theta`] runs a multistart Nelder–Mead search
//! followed by a compass polish. Every evaluation is logged, and the returned
//! half-width is the smallest value seen. For one or two coefficients,
//! [`grid_select_theta`] gives an exhaustive reference answer.

use std::sync::Arc;

use rand::Rng;

use crate::conformal::{check_alpha, conformal_quantile};
use crate::data::{stream_rng, Dataset, StreamRng};
use crate::error::{Error, Result};
use crate::exec;
use crate::family::{linear_theta_family, PredictionSet, Predictor};
use crate::linalg::PinvFit;

/// Feasible coefficient set.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaDomain {
    /// `lower <= theta <= upper` componentwise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Probability simplex in `dim` coordinates.
    Simplex { dim: usize },
}

impl ThetaDomain {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dom = ThetaDomain::Box { lower, upper };
        dom.validate()?;
        Ok(dom)
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        let dom = ThetaDomain::Simplex { dim };
        dom.validate()?;
        Ok(dom)
    }

    /// Box with coordinate `j` bounded by `10 (|ols_j| + 1)` in magnitude.
    pub fn around_ols(ols: &[f64]) -> Self {
        let half: Vec<f64> = ols.iter().map(|b| 10.0 * (b.abs() + 1.0)).collect();
        ThetaDomain::Box {
            lower: half.iter().map(|h| -h).collect(),
            upper: half,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ThetaDomain::Box { lower, .. } => lower.len(),
            ThetaDomain::Simplex { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaDomain::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::config("box bounds must be nonempty and of equal length"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::config("box is empty: need finite lower <= upper"));
                }
            }
            ThetaDomain::Simplex { dim } => {
                if *dim == 0 {
                    return Err(Error::config("simplex needs at least one coordinate"));
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, theta: &mut [f64]) {
        match self {
            ThetaDomain::Box { lower, upper } => {
                for ((t, l), u) in theta.iter_mut().zip(lower).zip(upper) {
                    *t = t.clamp(*l, *u);
                }
            }
            ThetaDomain::Simplex { .. } => project_simplex(theta),
        }
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        if theta.len() != self.dim() {
            return false;
        }
        match self {
            ThetaDomain::Box { lower, upper } => theta
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(t, (l, u))| *t >= l - tol && *t <= u + tol),
            ThetaDomain::Simplex { .. } => {
                theta.iter().all(|t| *t >= -tol) && (theta.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    fn steps(&self) -> Vec<f64> {
        match self {
            ThetaDomain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let w = 0.1 * (u - l);
                    if w > 0.0 {
                        w
                    } else {
                        1e-3
                    }
                })
                .collect(),
            ThetaDomain::Simplex { dim } => vec![0.5 / *dim as f64; *dim],
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            ThetaDomain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
            ThetaDomain::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
        }
    }
}

/// Euclidean projection onto `{t >= 0, sum t = 1}` (sort-based).
pub fn project_simplex(theta: &mut [f64]) {
    let mut u: Vec<f64> = theta.iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, v) in u.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    for t in theta.iter_mut() {
        let v = if t.is_nan() { 0.0 } else { *t };
        *t = (v - tau).max(0.0);
    }
}

/// Calibrated half-width of `|y - theta^T x|` on `data`.
pub fn t_alpha_theta(theta: &[f64], data: &Dataset, alpha: f64) -> Result<f64> {
    if theta.len() != data.dim() {
        return Err(Error::config(format!(
            "theta has {} coordinates, data has {}",
            theta.len(),
            data.dim()
        )));
    }
    let scores: Vec<f64> = data
        .iter()
        .map(|(x, y)| (y - x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()).abs())
        .collect();
    Ok(conformal_quantile(&scores, alpha)?.threshold)
}

/// One objective evaluation made by the search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchEvaluation {
    pub theta: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct LinearSelection {
    pub theta_hat: Vec<f64>,
    /// Half-width of `theta_hat` on the selection fold.
    pub t_alpha: f64,
    /// Half-width recalibrated on a fresh fold, once [`vf_lin`] has run.
    pub t_alpha_star: Option<f64>,
    pub search_trace: Vec<SearchEvaluation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Total objective evaluations across all starts.
    pub budget: usize,
    /// Starts drawn at random (box) or from exact fits through random rows.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 2000,
            random_starts: 6,
            seed: 0,
        }
    }
}

/// [`select_theta_with`] using default starts and seed.
pub fn select_theta(domain: &ThetaDomain, data_i1: &Dataset, alpha: f64, budget: usize) -> Result<LinearSelection> {
    select_theta_with(
        domain,
        data_i1,
        alpha,
        &SearchOptions {
            budget,
            ..SearchOptions::default()
        },
    )
}

pub fn select_theta_with(
    domain: &ThetaDomain,
    data_i1: &Dataset,
    alpha: f64,
    opts: &SearchOptions,
) -> Result<LinearSelection> {
    domain.validate()?;
    check_alpha(alpha)?;
    if opts.budget == 0 {
        return Err(Error::config("search budget must be at least one evaluation"));
    }
    if domain.dim() != data_i1.dim() {
        return Err(Error::config(format!(
            "domain has {} coordinates, data has {}",
            domain.dim(),
            data_i1.dim()
        )));
    }
    if data_i1.is_empty() {
        return Err(Error::config("selection fold is empty"));
    }

    let starts = initial_points(domain, data_i1, opts);
    let branches = starts.len().min(opts.budget);
    let per_branch = opts.budget / branches;
    let extra = opts.budget % branches;
    let steps = domain.steps();

    let traces: Vec<Result<Vec<SearchEvaluation>>> = exec::map_indices(branches, |b| {
        let budget = per_branch + usize::from(b < extra);
        let mut search = Branch {
            domain,
            data: data_i1,
            alpha,
            budget,
            trace: Vec::with_capacity(budget),
        };
        search.run(starts[b].clone(), &steps)?;
        Ok(search.trace)
    });

    let mut trace = Vec::with_capacity(opts.budget);
    for t in traces {
        trace.extend(t?);
    }
    let best = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("budget >= 1 gives at least one evaluation");
    Ok(LinearSelection {
        theta_hat: trace[best].theta.clone(),
        t_alpha: trace[best].value,
        t_alpha_star: None,
        search_trace: trace,
    })
}

fn initial_points(domain: &ThetaDomain, data: &Dataset, opts: &SearchOptions) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut pts = Vec::new();
    let mut push = |mut p: Vec<f64>| {
        domain.project(&mut p);
        pts.push(p);
    };
    push(ols(data));
    push(vec![0.0; d]);
    if let ThetaDomain::Simplex { dim } = domain {
        for l in 0..*dim {
            let mut e = vec![0.0; *dim];
            e[l] = 1.0;
            push(e);
        }
    }
    let mut rng = stream_rng(opts.seed, 0x7e7a);
    for s in 0..opts.random_starts {
        if s % 2 == 0 && data.len() >= d {
            if let Some(fit) = elemental_fit(data, &mut rng) {
                push(fit);
                continue;
            }
        }
        push(domain.sample(&mut rng));
    }
    pts
}

/// Least-squares coefficients (pseudo-inverse).
pub fn ols(data: &Dataset) -> Vec<f64> {
    PinvFit::new(&data.design_matrix(), &data.response_vector())
        .coef
        .iter()
        .copied()
        .collect()
}

/// Exact fit through `d` randomly chosen rows, if they are nonsingular.
fn elemental_fit(data: &Dataset, rng: &mut StreamRng) -> Option<Vec<f64>> {
    let d = data.dim();
    let idx = rand::seq::index::sample(rng, data.len(), d).into_vec();
    let sub = data.subset(&idx);
    let fit = PinvFit::new(&sub.design_matrix(), &sub.response_vector());
    (fit.rank == d).then(|| fit.coef.iter().copied().collect())
}

struct Branch<'a> {
    domain: &'a ThetaDomain,
    data: &'a Dataset,
    alpha: f64,
    budget: usize,
    trace: Vec<SearchEvaluation>,
}

impl Branch<'_> {
    fn eval(&mut self, theta: &[f64]) -> Result<Option<f64>> {
        if self.trace.len() >= self.budget {
            return Ok(None);
        }
        let value = t_alpha_theta(theta, self.data, self.alpha)?;
        self.trace.push(SearchEvaluation {
            theta: theta.to_vec(),
            value,
        });
        Ok(Some(value))
    }

    fn point(&self, mut theta: Vec<f64>) -> Vec<f64> {
        self.domain.project(&mut theta);
        theta
    }

    fn run(&mut self, start: Vec<f64>, steps: &[f64]) -> Result<()> {
        let Some((best, fbest)) = self.nelder_mead(start, steps)? else {
            return Ok(());
        };
        self.compass(best, fbest, steps)
    }

    fn nelder_mead(&mut self, start: Vec<f64>, steps: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        let d = start.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let x0 = self.point(start);
        let Some(f0) = self.eval(&x0)? else { return Ok(None) };
        simplex.push((x0.clone(), f0));
        for j in 0..d {
            let mut v = x0.clone();
            v[j] += steps[j];
            let mut v = self.point(v);
            if v == x0 {
                v[j] -= steps[j];
                v = self.point(v);
            }
            match self.eval(&v)? {
                Some(f) => simplex.push((v, f)),
                None => return Ok(Some(best_of(&simplex))),
            }
        }

        let tol = 1e-10 * steps.iter().fold(1.0_f64, |a, s| a.max(*s));
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let diameter = simplex
                .iter()
                .skip(1)
                .map(|(v, _)| dist(v, &simplex[0].0))
                .fold(0.0_f64, f64::max);
            if diameter < tol {
                break;
            }
            let worst = simplex[d].clone();
            let centroid: Vec<f64> = (0..d)
                .map(|j| simplex[..d].iter().map(|(v, _)| v[j]).sum::<f64>() / d as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = self.point(along(1.0));
            let Some(fr) = self.eval(&xr)? else { break };
            if fr < simplex[0].1 {
                let xe = self.point(along(2.0));
                let Some(fe) = self.eval(&xe)? else {
                    simplex[d] = (xr, fr);
                    break;
                };
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = self.point(along(0.5));
                let Some(fc) = self.eval(&xc)? else { break };
                (xc, fc)
            } else {
                let xc = self.point(along(-0.5));
                let Some(fc) = self.eval(&xc)? else { break };
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[d] = (xc, fc);
                continue;
            }
            let x0 = simplex[0].0.clone();
            for i in 1..=d {
                let shrunk: Vec<f64> = x0.iter().zip(&simplex[i].0).map(|(a, b)| a + 0.5 * (b - a)).collect();
                let shrunk = self.point(shrunk);
                match self.eval(&shrunk)? {
                    Some(f) => simplex[i] = (shrunk, f),
                    None => return Ok(Some(best_of(&simplex))),
                }
            }
        }
        Ok(Some(best_of(&simplex)))
    }

    /// Pattern search along coordinate directions (box) or mass transfers
    /// between coordinates (simplex), halving the step on failure.
    fn compass(&mut self, mut best: Vec<f64>, mut fbest: f64, steps: &[f64]) -> Result<()> {
        let d = best.len();
        let mut scale = 1.0;
        let directions: Vec<(usize, Option<usize>)> = match self.domain {
            ThetaDomain::Box { .. } => (0..d).map(|j| (j, None)).collect(),
            ThetaDomain::Simplex { .. } => (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, Some(j))))
                .collect(),
        };
        while scale > 1e-10 {
            let mut improved = false;
            for &(i, j) in &directions {
                for sign in [1.0, -1.0] {
                    if j.is_some() && sign < 0.0 {
                        continue;
                    }
                    let mut cand = best.clone();
                    cand[i] += sign * scale * steps[i];
                    if let Some(j) = j {
                        cand[j] -= scale * steps[i];
                    }
                    let cand = self.point(cand);
                    let Some(f) = self.eval(&cand)? else { return Ok(()) };
                    if f < fbest {
                        best = cand;
                        fbest = f;
                        improved = true;
                    }
                }
            }
            if !improved {
                scale *= 0.5;
            }
        }
        Ok(())
    }
}

fn best_of(simplex: &[(Vec<f64>, f64)]) -> (Vec<f64>, f64) {
    simplex
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("nonempty simplex")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exhaustive search over the grid `lower + k * step` (clipped at `upper`)
/// in one or two coordinates. Ties go to the first grid point in
/// row-major order.
pub fn grid_select_theta(
    lower: &[f64],
    upper: &[f64],
    step: f64,
    data: &Dataset,
    alpha: f64,
) -> Result<(Vec<f64>, f64)> {
    ThetaDomain::boxed(lower.to_vec(), upper.to_vec())?;
    if !(step > 0.0) {
        return Err(Error::config("grid step must be positive"));
    }
    let d = lower.len();
    if d > 2 || d != data.dim() {
        return Err(Error::config("grid search supports one or two coordinates matching the data"));
    }
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| {
            let n = ((u - l) / step).floor() as usize;
            let mut ax: Vec<f64> = (0..=n).map(|k| l + k as f64 * step).collect();
            if *ax.last().unwrap() < *u {
                ax.push(*u);
            }
            ax
        })
        .collect();
    let inner = if d == 2 { axes[1].len() } else { 1 };
    let total = axes[0].len() * inner;
    let point = |k: usize| -> Vec<f64> {
        if d == 1 {
            vec![axes[0][k]]
        } else {
            vec![axes[0][k / inner], axes[1][k % inner]]
        }
    };
    let values: Vec<Result<f64>> = exec::map_indices(total, |k| t_alpha_theta(&point(k), data, alpha));
    let mut best = (0, f64::INFINITY);
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        if v < best.1 || k == 0 {
            best = (k, v);
        }
    }
    Ok((point(best.0), best.1))
}

/// Efficiency-first set: `theta_hat` with its selection-fold half-width.
pub fn ef_lin(selection: &LinearSelection) -> PredictionSet {
    let t = selection.t_alpha;
    PredictionSet {
        family: Arc::new(linear_theta_family(selection.theta_hat.clone())),
        threshold: t,
        width: if t > 0.0 { 2.0 * t } else { 0.0 },
    }
}

/// Validity-first set: `theta_hat` recalibrated on a fresh fold. Records the
/// new half-width in `selection.t_alpha_star`.
pub fn vf_lin(selection: &mut LinearSelection, data_i2: &Dataset, alpha: f64) -> Result<PredictionSet> {
    let t = t_alpha_theta(&selection.theta_hat, data_i2, alpha)?;
    selection.t_alpha_star = Some(t);
    PredictionSet::new(Arc::new(linear_theta_family(selection.theta_hat.clone())), t, data_i2)
}

/// Dataset whose covariates are the predictors' outputs on `data`.
pub fn aggregate_features(mus: &[Arc<dyn Predictor>], data: &Dataset) -> Result<Dataset> {
    if mus.is_empty() {
        return Err(Error::config("need at least one predictor to aggregate"));
    }
    let mut z = Vec::with_capacity(data.len() * mus.len());
    for x in data.rows() {
        z.extend(mus.iter().map(|m| m.predict(x)));
    }
    Dataset::new(z, mus.len(), data.responses().to_vec())
}
