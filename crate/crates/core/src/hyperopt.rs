//! Sparsity-bound selection by Bayesian optimization of the TPO score.
//!
//! The search runs in log space over the bounds `(c_a, c_b)`. A Gaussian
//! process with a squared-exponential kernel models the score, and new points
//! maximize expected improvement. Random search is available as a fallback.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::covariance::JointCovariance;
use crate::error::{Error, Result};
use crate::optimizer::{solve_order, FitResult, InitMode, OptimizerSettings, OrderFit};
use crate::problem::PenaltyConfig;

/// `|ρ| · (2 − α_a·nnz_a/p − α_b·nnz_b/q)`.
pub fn tpo_score(
    association: f64,
    nonzero_a: usize,
    p: usize,
    nonzero_b: usize,
    q: usize,
    alpha_a: f64,
    alpha_b: f64,
) -> f64 {
    let density = alpha_a * nonzero_a as f64 / p as f64 + alpha_b * nonzero_b as f64 / q as f64;
    association.abs() * (2.0 - density)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    #[default]
    Bayes,
    Random,
}

impl std::str::FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bayes" => Ok(SearchMethod::Bayes),
            "random" => Ok(SearchMethod::Random),
            other => Err(Error::Config(format!(
                "unknown search method {other:?} (expected bayes or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub ca_range: (f64, f64),
    pub cb_range: (f64, f64),
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub budget: usize,
    pub n0: usize,
    pub seed: u64,
}

impl SearchSpace {
    /// Bounds `[0.1·√p, √p]` and `[0.1·√q, √q]`, `n0 = max(5, N/5)`.
    pub fn for_dims(p: usize, q: usize, alpha_a: f64, alpha_b: f64, budget: usize, seed: u64) -> Self {
        let la = (p as f64).sqrt();
        let lb = (q as f64).sqrt();
        Self {
            ca_range: (0.1 * la, la),
            cb_range: (0.1 * lb, lb),
            alpha_a,
            alpha_b,
            budget,
            n0: default_n0(budget),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("c_a", self.ca_range), ("c_b", self.cb_range)] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} range must satisfy 0 < lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        if self.budget == 0 {
            return Err(Error::Config("search budget must be at least 1".into()));
        }
        if self.n0 == 0 || self.n0 > self.budget {
            return Err(Error::Config(format!(
                "initial design size {} must lie in 1..={}",
                self.n0, self.budget
            )));
        }
        for alpha in [self.alpha_a, self.alpha_b] {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn log_bounds(&self) -> [(f64, f64); 2] {
        [
            (self.ca_range.0.ln(), self.ca_range.1.ln()),
            (self.cb_range.0.ln(), self.cb_range.1.ln()),
        ]
    }
}

pub fn default_n0(budget: usize) -> usize {
    5.max(budget / 5).min(budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub params: (f64, f64),
    pub score: f64,
    pub association: f64,
    pub nonzeros: (usize, usize),
    pub converged: bool,
}

impl TrialRecord {
    pub fn failed(params: (f64, f64)) -> Self {
        Self {
            params,
            score: 0.0,
            association: 0.0,
            nonzeros: (0, 0),
            converged: false,
        }
    }
}

/// Gaussian-process regression with a squared-exponential kernel.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    points: Vec<DVector<f64>>,
    scores: Vec<f64>,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub prior_mean: f64,
    /// Diagonal jitter that was needed for the factorization.
    pub jitter: f64,
    chol: DMatrix<f64>,
    weights: DVector<f64>,
}

pub const NOISE_FLOOR: f64 = 1e-6;
const LENGTH_SCALE_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];

fn kernel(x: &DVector<f64>, y: &DVector<f64>, ls: &[f64], signal: f64) -> f64 {
    let d2: f64 = x
        .iter()
        .zip(y.iter())
        .zip(ls)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    signal * (-0.5 * d2).exp()
}

impl GpSurrogate {
    /// Surrogate with given hyperparameters. The prior mean is the score mean.
    pub fn with_hyperparameters(
        points: Vec<DVector<f64>>,
        scores: Vec<f64>,
        length_scales: Vec<f64>,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != scores.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} scores",
                points.len(),
                scores.len()
            )));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) || length_scales.len() != dim {
            return Err(Error::Dimension("inconsistent input dimension".into()));
        }
        if length_scales.iter().any(|&l| !(l > 0.0)) || !(signal_variance > 0.0) {
            return Err(Error::Domain("kernel parameters must be positive".into()));
        }
        let n = points.len();
        let prior_mean = scores.iter().sum::<f64>() / n as f64;
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel(&points[i], &points[j], &length_scales, signal_variance)
        });
        let centered = DVector::from_iterator(n, scores.iter().map(|s| s - prior_mean));

        let mut jitter = 0.0;
        loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += noise_variance + jitter;
            }
            if let Some(ch) = kj.cholesky() {
                let weights = ch.solve(&centered);
                return Ok(Self {
                    points,
                    scores,
                    length_scales,
                    signal_variance,
                    noise_variance,
                    prior_mean,
                    jitter,
                    chol: ch.l(),
                    weights,
                });
            }
            jitter = if jitter == 0.0 {
                1e-10 * signal_variance
            } else {
                jitter * 10.0
            };
            if jitter > 1e-2 * signal_variance {
                return Err(Error::Conditioning { jitter });
            }
        }
    }

    /// Fits length-scales by a marginal-likelihood grid over multiples of the
    /// data span in each dimension. Signal variance is the score variance.
    pub fn fit(points: Vec<DVector<f64>>, scores: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Dimension("no observations".into()));
        }
        let dim = points[0].len();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let signal = var.max(1e-4);
        let noise = NOISE_FLOOR.max(1e-6 * signal);
        let spans: Vec<f64> = (0..dim)
            .map(|d| {
                let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[d]), hi.max(p[d]))
                });
                (hi - lo).max(1e-3)
            })
            .collect();

        let mut best: Option<(f64, Self)> = None;
        let mut idx = vec![0usize; dim];
        loop {
            let ls: Vec<f64> = idx
                .iter()
                .zip(&spans)
                .map(|(&i, s)| LENGTH_SCALE_GRID[i] * s)
                .collect();
            if let Ok(gp) = Self::with_hyperparameters(points.clone(), scores.clone(), ls, signal, noise) {
                let lml = gp.log_marginal_likelihood();
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((lml, gp));
                }
            }
            // odometer over the grid
            let mut d = 0;
            while d < dim {
                idx[d] += 1;
                if idx[d] < LENGTH_SCALE_GRID.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        best.map(|(_, gp)| gp)
            .ok_or(Error::Conditioning { jitter: 1e-2 * signal })
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.scores.len();
        let centered = DVector::from_iterator(n, self.scores.iter().map(|s| s - self.prior_mean));
        let log_det: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * centered.dot(&self.weights) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn observations(&self) -> usize {
        self.points.len()
    }

    /// Posterior mean and variance of the latent score at `query`.
    pub fn posterior(&self, query: &DVector<f64>) -> (f64, f64) {
        let ks = DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| kernel(p, query, &self.length_scales, self.signal_variance)),
        );
        let mean = self.prior_mean + ks.dot(&self.weights);
        let v = self
            .chol
            .solve_lower_triangular(&ks)
            .unwrap_or_else(|| DVector::zeros(ks.len()));
        let var = (self.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }
}

pub fn gp_posterior(surrogate: &GpSurrogate, query: &DVector<f64>) -> (f64, f64) {
    surrogate.posterior(query)
}

/// Expected improvement over `best` for a normal posterior `N(mu, sigma²)`.
pub fn ei_normal(mu: f64, sigma: f64, best: f64) -> f64 {
    if !(sigma > 0.0) {
        return 0.0;
    }
    let n = Normal::standard();
    let z = (mu - best) / sigma;
    ((mu - best) * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

pub fn expected_improvement(surrogate: &GpSurrogate, query: &DVector<f64>, best: f64) -> f64 {
    let (mu, var) = surrogate.posterior(query);
    ei_normal(mu, var.sqrt(), best)
}

/// Latin-hypercube sample of `n` points in the box.
fn latin_hypercube(n: usize, bounds: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut columns: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let mut strata: Vec<f64> = (0..n)
                .map(|i| lo + (hi - lo) * (i as f64 + rng.random::<f64>()) / n as f64)
                .collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                strata.swap(i, j);
            }
            strata
        })
        .collect();
    (0..n)
        .map(|i| DVector::from_iterator(bounds.len(), columns.iter_mut().map(|c| c[i])))
        .collect()
}

fn uniform_point(bounds: &[(f64, f64)], rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        bounds.len(),
        bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()),
    )
}

fn clamp_to(x: &mut DVector<f64>, bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Compass search for a maximum of `f` inside the box.
fn compass_maximize<F: Fn(&DVector<f64>) -> f64>(
    f: &F,
    start: DVector<f64>,
    bounds: &[(f64, f64)],
) -> (DVector<f64>, f64) {
    let mut x = start;
    clamp_to(&mut x, bounds);
    let mut fx = f(&x);
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let mut step = 0.25;
    let mut evals = 0;
    while step > 1e-4 && evals < 400 {
        let mut improved = false;
        for d in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] += sign * step * widths[d];
                clamp_to(&mut y, bounds);
                let fy = f(&y);
                evals += 1;
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

fn best_index(trials: &[TrialRecord]) -> usize {
    // first maximum wins, so ties resolve to the earliest trial
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best].score {
            best = i;
        }
    }
    best
}

/// Runs the search and returns the best parameters with all trials in
/// evaluation order.
pub fn optimize_hyperparams<F>(
    mut evaluate: F,
    space: &SearchSpace,
    method: SearchMethod,
) -> Result<((f64, f64), Vec<TrialRecord>)>
where
    F: FnMut(f64, f64) -> TrialRecord,
{
    space.validate()?;
    let bounds = space.log_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(space.budget);
    let mut points: Vec<DVector<f64>> = Vec::with_capacity(space.budget);

    let mut observe = |x: DVector<f64>, trials: &mut Vec<TrialRecord>, points: &mut Vec<DVector<f64>>| {
        let params = (x[0].exp(), x[1].exp());
        let mut t = evaluate(params.0, params.1);
        t.params = params;
        if !t.converged || !t.score.is_finite() {
            t.score = 0.0;
        }
        trials.push(t);
        points.push(x);
    };

    match method {
        SearchMethod::Random => {
            for _ in 0..space.budget {
                let x = uniform_point(&bounds, &mut rng);
                observe(x, &mut trials, &mut points);
            }
        }
        SearchMethod::Bayes => {
            for x in latin_hypercube(space.n0, &bounds, &mut rng) {
                observe(x, &mut trials, &mut points);
            }
            while trials.len() < space.budget {
                let scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
                let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let next = match GpSurrogate::fit(points.clone(), scores) {
                    Ok(gp) => {
                        let acq = |x: &DVector<f64>| expected_improvement(&gp, x, best);
                        let mut starts = vec![points[best_index(&trials)].clone()];
                        starts.extend((0..10).map(|_| uniform_point(&bounds, &mut rng)));
                        let mut winner: Option<(DVector<f64>, f64)> = None;
                        for s in starts {
                            let (x, v) = compass_maximize(&acq, s, &bounds);
                            if winner.as_ref().is_none_or(|(_, w)| v > *w) {
                                winner = Some((x, v));
                            }
                        }
                        match winner {
                            Some((x, v)) if v > 0.0 => x,
                            _ => uniform_point(&bounds, &mut rng),
                        }
                    }
                    Err(e) => {
                        log::warn!("surrogate fit failed ({e}); sampling at random");
                        uniform_point(&bounds, &mut rng)
                    }
                };
                observe(next, &mut trials, &mut points);
            }
        }
    }

    if trials.iter().all(|t| !t.converged) {
        log::warn!("no converged trial in the hyperparameter search; returning best effort");
    }
    let best = &trials[best_index(&trials)];
    Ok((best.params, trials))
}

/// Penalty settings and search space shared by all orders.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPlan {
    pub space: SearchSpace,
    pub method: SearchMethod,
}

#[derive(Debug, Clone)]
pub struct SearchedFit {
    pub fit: FitResult,
    /// Selected `(c_a, c_b)` per order.
    pub selected: Vec<(f64, f64)>,
    pub trials: Vec<Vec<TrialRecord>>,
}

fn trial_from(order: &OrderFit, params: (f64, f64), p: usize, q: usize, space: &SearchSpace) -> TrialRecord {
    let converged = order.diagnostics.converged;
    let score = if converged {
        tpo_score(
            order.association,
            order.nonzeros.0,
            p,
            order.nonzeros.1,
            q,
            space.alpha_a,
            space.alpha_b,
        )
    } else {
        0.0
    };
    TrialRecord {
        params,
        score,
        association: order.association,
        nonzeros: order.nonzeros,
        converged,
    }
}

/// Selects the sparsity bounds of each order by searching the TPO score,
/// then keeps the fit at the selected bounds before moving to the next order.
pub fn search_and_fit(
    cov: &JointCovariance,
    orders: usize,
    plan: &SearchPlan,
    settings: &OptimizerSettings,
    init: InitMode,
) -> Result<SearchedFit> {
    let (p, q) = (cov.p(), cov.q());
    if orders == 0 || orders > p.min(q) {
        return Err(Error::Dimension(format!(
            "orders must lie in 1..={}, got {orders}",
            p.min(q)
        )));
    }
    let space = &plan.space;
    let mut out = SearchedFit {
        fit: FitResult::default(),
        selected: Vec::new(),
        trials: Vec::new(),
    };
    for k in 1..=orders {
        let prev_a = out.fit.prev_a();
        let prev_b = out.fit.prev_b();
        let mut best_fit: Option<(f64, OrderFit)> = None;
        let mut failure = None;
        let order_space = SearchSpace {
            seed: space.seed.wrapping_add(k as u64 - 1),
            ..space.clone()
        };
        let (params, trials) = optimize_hyperparams(
            |ca, cb| {
                let pens = (
                    PenaltyConfig::new(space.alpha_a, ca),
                    PenaltyConfig::new(space.alpha_b, cb),
                );
                let (pa, pb) = match pens {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => return TrialRecord::failed((ca, cb)),
                };
                match solve_order(cov, &prev_a, &prev_b, pa, pb, settings, init) {
                    Ok(o) => {
                        let t = trial_from(&o, (ca, cb), p, q, space);
                        if best_fit.as_ref().is_none_or(|(s, _)| t.score > *s) {
                            best_fit = Some((t.score, o));
                        }
                        t
                    }
                    Err(e) => {
                        failure = Some(e.to_string());
                        TrialRecord::failed((ca, cb))
                    }
                }
            },
            &order_space,
            plan.method,
        )?;
        out.trials.push(trials);
        match best_fit {
            Some((_, o)) => {
                out.selected.push(params);
                out.fit.push(o);
            }
            None => {
                out.fit.failure = Some(format!(
                    "order {k}: every trial failed ({})",
                    failure.unwrap_or_default()
                ));
                break;
            }
        }
    }
    Ok(out)
}
