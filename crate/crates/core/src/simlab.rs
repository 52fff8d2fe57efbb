//! Simulation scenarios, performance measures and replicated experiments.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{estimate_joint, EstimatorTag, JointCovariance};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::hyperopt::{search_and_fit, SearchPlan};
use crate::optimizer::{fit, FitResult, InitMode, OptimizerSettings, OrderPenalties};
use crate::oracle::{true_directions, TrueSolution};
use crate::problem::DirectionPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    LowDim,
    HighDim,
    /// `p = 10` with `q` variables on the second side.
    Runtime { q: usize },
}

impl Setting {
    pub const NAMES: &'static str = "low_dim, high_dim, runtime:<q>";

    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Setting::LowDim => (10, 10),
            Setting::HighDim => (100, 100),
            Setting::Runtime { q } => (10, q),
        }
    }

    /// Sample size used in the reference design.
    pub fn default_n(&self) -> usize {
        match self {
            Setting::LowDim => 100,
            Setting::HighDim => 50,
            Setting::Runtime { .. } => 100,
        }
    }

    /// Number of nonzero-association orders.
    pub fn orders(&self) -> usize {
        match self {
            Setting::LowDim | Setting::HighDim => 2,
            Setting::Runtime { .. } => 1,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::LowDim => write!(f, "low_dim"),
            Setting::HighDim => write!(f, "high_dim"),
            Setting::Runtime { q } => write!(f, "runtime:{q}"),
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "low_dim" => return Ok(Setting::LowDim),
            "high_dim" => return Ok(Setting::HighDim),
            _ => {}
        }
        let q = lower
            .strip_prefix("runtime:")
            .or_else(|| lower.strip_prefix("runtime(").and_then(|r| r.strip_suffix(')')))
            .and_then(|q| q.parse::<usize>().ok());
        match q {
            Some(q) if q >= 10 => Ok(Setting::Runtime { q }),
            Some(q) => Err(Error::Config(format!("runtime setting needs q >= 10, got {q}"))),
            None => Err(Error::Config(format!(
                "unknown setting {s:?}; valid settings: {}",
                Setting::NAMES
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Normal,
    T3,
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Distribution::Normal),
            "t3" => Ok(Distribution::T3),
            other => Err(Error::Config(format!(
                "unknown distribution {other:?} (expected normal or t3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub setting: Setting,
    pub n: usize,
    pub contamination_rate: f64,
    pub contamination_shift: f64,
    pub distribution: Distribution,
    pub seed: u64,
    pub replicates: usize,
}

impl ScenarioConfig {
    pub fn new(setting: Setting) -> Self {
        Self {
            setting,
            n: setting.default_n(),
            contamination_rate: 0.0,
            contamination_shift: 0.0,
            distribution: Distribution::Normal,
            seed: 0,
            replicates: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.contamination_rate) {
            return Err(Error::Config(format!(
                "contamination rate must lie in [0, 0.5], got {}",
                self.contamination_rate
            )));
        }
        if !(self.contamination_shift >= 0.0) || !self.contamination_shift.is_finite() {
            return Err(Error::Config("contamination shift must be finite and >= 0".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("need at least 2 observations".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("need at least 1 replicate".into()));
        }
        if let Setting::Runtime { q } = self.setting {
            if q < 10 {
                return Err(Error::Config("runtime setting needs q >= 10".into()));
            }
        }
        Ok(())
    }
}

fn equicorrelated(k: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { r })
}

/// Joint covariance of a setting together with its exact solution.
pub fn build_sigma(setting: Setting) -> (JointCovariance, TrueSolution) {
    let (p, q) = setting.dims();
    let (cxx, cyy, cxy) = match setting {
        Setting::LowDim => {
            let mut cxy = DMatrix::zeros(p, q);
            cxy[(0, 0)] = 0.9;
            cxy[(1, 1)] = 0.7;
            (DMatrix::identity(p, p), DMatrix::identity(q, q), cxy)
        }
        Setting::HighDim => {
            let mut cxx = DMatrix::identity(p, p);
            cxx.view_mut((0, 0), (10, 10)).copy_from(&equicorrelated(10, 0.9));
            cxx.view_mut((10, 10), (10, 10)).copy_from(&equicorrelated(10, 0.7));
            let mut cxy = DMatrix::zeros(p, q);
            cxy.view_mut((0, 0), (10, 10)).fill(0.9);
            cxy.view_mut((10, 10), (10, 10)).fill(0.5);
            (cxx.clone(), cxx, cxy)
        }
        Setting::Runtime { q } => {
            let s1 = equicorrelated(10, 0.8);
            let mut cyy = DMatrix::identity(q, q);
            cyy.view_mut((0, 0), (10, 10)).copy_from(&s1);
            let mut cxy = DMatrix::zeros(p, q);
            cxy.view_mut((0, 0), (10, 10)).fill(0.8);
            (s1, cyy, cxy)
        }
    };
    let cov = JointCovariance::from_blocks(cxx, cyy, cxy).expect("setting blocks are consistent");
    let truth = true_directions(&cov, setting.orders()).expect("setting covariances are positive definite");
    (cov, truth)
}

fn cholesky_factor(sigma: &JointCovariance) -> Result<DMatrix<f64>> {
    sigma
        .full()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("joint covariance has no Cholesky factor".into()))
}

fn split(rows: DMatrix<f64>, p: usize) -> Result<(DataMatrix, DataMatrix)> {
    let q = rows.ncols() - p;
    let x = rows.columns(0, p).into_owned();
    let y = rows.columns(p, q).into_owned();
    Ok((DataMatrix::new(x)?, DataMatrix::new(y)?))
}

fn normal_row(l: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let z = DVector::from_fn(l.nrows(), |_, _| StandardNormal.sample(rng));
    l * z
}

/// Draws `n` observations from `N(0, Σ)` or `t₃(0, Σ)` with `Σ` as the
/// scale matrix.
pub fn sample(
    sigma: &JointCovariance,
    n: usize,
    distribution: Distribution,
    seed: u64,
) -> Result<(DataMatrix, DataMatrix)> {
    if n == 0 {
        return Err(Error::Dimension("sample size must be positive".into()));
    }
    let l = cholesky_factor(sigma)?;
    let d = l.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new(3.0).expect("3 degrees of freedom");
    let mut rows = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut r = normal_row(&l, &mut rng);
        if distribution == Distribution::T3 {
            let w: f64 = chi.sample(&mut rng);
            r *= (3.0 / w).sqrt();
        }
        rows.row_mut(i).copy_from(&r.transpose());
    }
    split(rows, sigma.p())
}

/// Replaces `⌊rate·n⌋` random rows with draws from `N(shift·1, Σ)`.
pub fn contaminate(
    x: &DataMatrix,
    y: &DataMatrix,
    rate: f64,
    shift: f64,
    sigma: &JointCovariance,
    seed: u64,
) -> Result<(DataMatrix, DataMatrix)> {
    if !(0.0..=0.5).contains(&rate) {
        return Err(Error::Config(format!(
            "contamination rate must lie in [0, 0.5], got {rate}"
        )));
    }
    let n = x.nrows();
    let m = (rate * n as f64 + 1e-9).floor() as usize;
    if m == 0 {
        return Ok((x.clone(), y.clone()));
    }
    let p = x.ncols();
    let mut rows = x.hstack(y)?.into_values();
    let l = cholesky_factor(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in index::sample(&mut rng, n, m) {
        let r = normal_row(&l, &mut rng).add_scalar(shift);
        rows.row_mut(i).copy_from(&r.transpose());
    }
    let (cx, cy) = split(rows, p)?;
    Ok((
        with_names_of(cx, x),
        with_names_of(cy, y),
    ))
}

fn with_names_of(m: DataMatrix, like: &DataMatrix) -> DataMatrix {
    match like.column_names() {
        Some(names) => m.clone().with_names(names.to_vec()).unwrap_or(m),
        None => m,
    }
}

/// Angle between two directions after sign folding, in `[0, π/2]`.
pub fn angle(true_v: &DVector<f64>, est_v: &DVector<f64>) -> Result<f64> {
    if true_v.len() != est_v.len() {
        return Err(Error::Dimension("angle needs vectors of equal length".into()));
    }
    let (nt, ne) = (true_v.norm(), est_v.norm());
    if nt == 0.0 || ne == 0.0 {
        return Err(Error::Domain("angle with a zero vector is undefined".into()));
    }
    let cos = (true_v.dot(est_v) / (nt * ne)).abs().min(1.0);
    Ok(cos.acos())
}

/// True-positive and true-negative rates of the support of `est_v`.
pub fn sparsity_rates(true_v: &DVector<f64>, est_v: &DVector<f64>, zero_tol: f64) -> Result<(f64, f64)> {
    if true_v.len() != est_v.len() {
        return Err(Error::Dimension("sparsity rates need vectors of equal length".into()));
    }
    let (mut pos, mut tp, mut neg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (t, e) in true_v.iter().zip(est_v.iter()) {
        let est_nonzero = e.abs() > zero_tol;
        if *t != 0.0 {
            pos += 1;
            tp += est_nonzero as usize;
        } else {
            neg += 1;
            tn += !est_nonzero as usize;
        }
    }
    let rate = |hit: usize, total: usize| if total == 0 { 1.0 } else { hit as f64 / total as f64 };
    Ok((rate(tp, pos), rate(tn, neg)))
}

/// Mean squared residual `Σ_k (a_k'x − b_k'y)²` over test observations and
/// training replicates; `trim` drops that fraction of the largest residuals.
pub fn residual_score(
    fits: &[Vec<DirectionPair>],
    test_x: &DataMatrix,
    test_y: &DataMatrix,
    trim: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&trim) {
        return Err(Error::Domain(format!("trim must lie in [0, 1), got {trim}")));
    }
    if fits.is_empty() || fits.iter().any(|f| f.is_empty()) {
        return Err(Error::Domain("residual score needs at least one direction".into()));
    }
    if test_x.nrows() != test_y.nrows() {
        return Err(Error::Alignment {
            x_rows: test_x.nrows(),
            y_rows: test_y.nrows(),
        });
    }
    let (xs, ys) = (test_x.values(), test_y.values());
    let mut squares = Vec::with_capacity(fits.len() * xs.nrows());
    for dirs in fits {
        for d in dirs {
            if d.a.len() != xs.ncols() || d.b.len() != ys.ncols() {
                return Err(Error::Dimension("direction length does not match test data".into()));
            }
        }
        let a = DMatrix::from_columns(&dirs.iter().map(|d| d.a.clone()).collect::<Vec<_>>());
        let b = DMatrix::from_columns(&dirs.iter().map(|d| d.b.clone()).collect::<Vec<_>>());
        let r = xs * a - ys * b;
        squares.extend(r.row_iter().map(|row| row.norm_squared()));
    }
    if squares.is_empty() {
        return Err(Error::Domain("empty test set".into()));
    }
    let drop = (trim * squares.len() as f64 + 1e-9).floor() as usize;
    if drop > 0 {
        squares.sort_by(f64::total_cmp);
        squares.truncate(squares.len() - drop);
    }
    Ok(squares.iter().sum::<f64>() / squares.len() as f64)
}

/// How the sparsity bounds of a replicate are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyPlan {
    Fixed(OrderPenalties),
    Search(SearchPlan),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub estimator: EstimatorTag,
    pub orders: usize,
    pub penalties: PenaltyPlan,
    pub settings: OptimizerSettings,
    pub init: InitMode,
    pub repair_pd: bool,
    pub zero_tol: f64,
}

impl ExperimentSpec {
    pub fn fixed(estimator: EstimatorTag, orders: usize, penalties: OrderPenalties) -> Self {
        Self {
            estimator,
            orders,
            penalties: PenaltyPlan::Fixed(penalties),
            settings: OptimizerSettings::default(),
            init: InitMode::Orthogonal,
            repair_pd: true,
            zero_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderMetrics {
    pub order: usize,
    pub theta_a: f64,
    pub theta_b: f64,
    pub tpr_a: f64,
    pub tnr_a: f64,
    pub tpr_b: f64,
    pub tnr_b: f64,
    pub association: f64,
    pub true_association: f64,
    pub nonzero_a: usize,
    pub nonzero_b: usize,
    pub converged: bool,
    /// Selected bounds when they were searched.
    pub c_a: Option<f64>,
    pub c_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub replicate: usize,
    pub seed: u64,
    pub orders: Vec<OrderMetrics>,
    pub runtime_seconds: f64,
    pub error: Option<String>,
}

/// Seed of replicate `r`, independent of execution order.
pub fn replicate_seed(master: u64, replicate: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replicate as u64 + 1);
    rng.next_u64()
}

/// Metrics of a fitted direction set against the exact solution.
pub fn evaluate_fit(
    fit: &FitResult,
    truth: &TrueSolution,
    selected: Option<&[(f64, f64)]>,
    zero_tol: f64,
) -> Result<Vec<OrderMetrics>> {
    let mut out = Vec::with_capacity(fit.orders());
    for (k, d) in fit.directions.iter().enumerate() {
        let (ta, tb) = (&truth.a_vectors[k], &truth.b_vectors[k]);
        let (tpr_a, tnr_a) = sparsity_rates(ta, &d.a, zero_tol)?;
        let (tpr_b, tnr_b) = sparsity_rates(tb, &d.b, zero_tol)?;
        let (na, nb) = fit.nonzero_counts[k];
        out.push(OrderMetrics {
            order: k + 1,
            theta_a: angle(ta, &d.a).unwrap_or(f64::NAN),
            theta_b: angle(tb, &d.b).unwrap_or(f64::NAN),
            tpr_a,
            tnr_a,
            tpr_b,
            tnr_b,
            association: fit.associations[k],
            true_association: truth.rhos[k],
            nonzero_a: na,
            nonzero_b: nb,
            converged: fit.diagnostics[k].converged,
            c_a: selected.and_then(|s| s.get(k)).map(|s| s.0),
            c_b: selected.and_then(|s| s.get(k)).map(|s| s.1),
        });
    }
    Ok(out)
}

fn run_replicate(
    config: &ScenarioConfig,
    spec: &ExperimentSpec,
    sigma: &JointCovariance,
    truth: &TrueSolution,
    replicate: usize,
) -> MetricsReport {
    let seed = replicate_seed(config.seed, replicate);
    let start = Instant::now();
    let result = (|| -> Result<(Vec<OrderMetrics>, Option<String>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sample_seed, contam_seed, fit_seed) = (rng.next_u64(), rng.next_u64(), rng.next_u64());
        let (x, y) = sample(sigma, config.n, config.distribution, sample_seed)?;
        let (x, y) = contaminate(
            &x,
            &y,
            config.contamination_rate,
            config.contamination_shift,
            sigma,
            contam_seed,
        )?;
        let cov = estimate_joint(&x, &y, spec.estimator, spec.repair_pd)?;
        let settings = OptimizerSettings {
            seed: fit_seed,
            ..spec.settings.clone()
        };
        let (fit, selected) = match &spec.penalties {
            PenaltyPlan::Fixed(p) => (fit(&cov, spec.orders, p, &settings, spec.init)?, None),
            PenaltyPlan::Search(plan) => {
                let plan = SearchPlan {
                    space: crate::hyperopt::SearchSpace {
                        seed: fit_seed,
                        ..plan.space.clone()
                    },
                    method: plan.method,
                };
                let s = search_and_fit(&cov, spec.orders, &plan, &settings, spec.init)?;
                (s.fit, Some(s.selected))
            }
        };
        let metrics = evaluate_fit(&fit, truth, selected.as_deref(), spec.zero_tol)?;
        Ok((metrics, fit.failure.clone()))
    })();
    let runtime_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((orders, failure)) => MetricsReport {
            replicate,
            seed,
            orders,
            runtime_seconds,
            error: failure,
        },
        Err(e) => MetricsReport {
            replicate,
            seed,
            orders: Vec::new(),
            runtime_seconds,
            error: Some(e.to_string()),
        },
    }
}

/// Runs all replicates; failures are recorded per replicate. Replicates run
/// on the current rayon pool and results come back in replicate order.
pub fn run_scenario(config: &ScenarioConfig, spec: &ExperimentSpec) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    spec.settings.validate()?;
    let (p, q) = config.setting.dims();
    if spec.orders == 0 || spec.orders > p.min(q) {
        return Err(Error::Config(format!(
            "orders must lie in 1..={}, got {}",
            p.min(q),
            spec.orders
        )));
    }
    let (sigma, truth) = build_sigma(config.setting);
    let truth = if spec.orders > truth.orders() {
        true_directions(&sigma, spec.orders)?
    } else {
        truth
    };
    Ok((0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, spec, &sigma, &truth, r))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// Mean and `sd/√n` with the sample standard deviation; NaN entries are
    /// skipped.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSummary {
    pub order: usize,
    pub replicates: usize,
    pub converged: usize,
    pub theta_a: MeanSe,
    pub theta_b: MeanSe,
    pub tpr_a: MeanSe,
    pub tnr_a: MeanSe,
    pub tpr_b: MeanSe,
    pub tnr_b: MeanSe,
    pub association: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub replicates: usize,
    pub failed: usize,
    pub runtime_seconds: MeanSe,
    pub orders: Vec<OrderSummary>,
}

pub fn summarize(reports: &[MetricsReport]) -> ScenarioSummary {
    let max_order = reports.iter().map(|r| r.orders.len()).max().unwrap_or(0);
    let orders = (1..=max_order)
        .map(|k| {
            let ms: Vec<&OrderMetrics> = reports
                .iter()
                .filter_map(|r| r.orders.get(k - 1))
                .collect();
            let col = |f: fn(&OrderMetrics) -> f64| MeanSe::of(ms.iter().map(|m| f(m)));
            OrderSummary {
                order: k,
                replicates: ms.len(),
                converged: ms.iter().filter(|m| m.converged).count(),
                theta_a: col(|m| m.theta_a),
                theta_b: col(|m| m.theta_b),
                tpr_a: col(|m| m.tpr_a),
                tnr_a: col(|m| m.tnr_a),
                tpr_b: col(|m| m.tpr_b),
                tnr_b: col(|m| m.tnr_b),
                association: col(|m| m.association),
            }
        })
        .collect();
    ScenarioSummary {
        replicates: reports.len(),
        failed: reports.iter().filter(|r| r.error.is_some()).count(),
        runtime_seconds: MeanSe::of(reports.iter().map(|r| r.runtime_seconds)),
        orders,
    }
}

pub const REPORT_CSV_COLUMNS: [&str; 17] = [
    "replicate",
    "seed",
    "order",
    "theta_a",
    "theta_b",
    "tpr_a",
    "tnr_a",
    "tpr_b",
    "tnr_b",
    "association",
    "true_association",
    "nonzero_a",
    "nonzero_b",
    "converged",
    "c_a",
    "c_b",
    "runtime_seconds",
];

/// One row per replicate and order; failed replicates get a single row with
/// empty metrics.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = REPORT_CSV_COLUMNS.to_vec();
    header.push("error");
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        let err = r.error.clone().unwrap_or_default();
        if r.orders.is_empty() {
            let mut row = vec![r.replicate.to_string(), r.seed.to_string()];
            row.extend(std::iter::repeat_n(String::new(), REPORT_CSV_COLUMNS.len() - 3));
            row.push(r.runtime_seconds.to_string());
            row.push(err);
            w.write_record(&row)?;
            continue;
        }
        for m in &r.orders {
            w.write_record(&[
                r.replicate.to_string(),
                r.seed.to_string(),
                m.order.to_string(),
                m.theta_a.to_string(),
                m.theta_b.to_string(),
                m.tpr_a.to_string(),
                m.tnr_a.to_string(),
                m.tpr_b.to_string(),
                m.tnr_b.to_string(),
                m.association.to_string(),
                m.true_association.to_string(),
                m.nonzero_a.to_string(),
                m.nonzero_b.to_string(),
                m.converged.to_string(),
                opt(m.c_a),
                opt(m.c_b),
                r.runtime_seconds.to_string(),
                err.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::pearson_cov;
    use crate::linalg::unit;
    use nalgebra::dvector;
    use proptest::prelude::*;

    #[test]
    fn low_dim_sigma() {
        let (cov, truth) = build_sigma(Setting::LowDim);
        assert_eq!(cov.cxy[(0, 0)], 0.9);
        assert_eq!(cov.cxy[(1, 1)], 0.7);
        assert_eq!(cov.cxy.iter().filter(|&&v| v != 0.0).count(), 2);
        assert!((truth.rhos[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn high_dim_truth_matches_reference_values() {
        let (_, truth) = build_sigma(Setting::HighDim);
        assert!((truth.rhos[0] - 0.989).abs() < 1e-3);
        assert!((truth.rhos[1] - 0.685).abs() < 1e-3);
        assert!((truth.a_vectors[0][0] - 0.105).abs() < 1e-3);
        assert!((truth.a_vectors[1][10] - 0.117).abs() < 1e-3);
        assert!(truth.a_vectors[0].iter().skip(10).all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn runtime_sigma() {
        let (cov, truth) = build_sigma(Setting::Runtime { q: 50 });
        assert_eq!(cov.full().nrows(), 60);
        assert!(cov.cxy.view((0, 0), (10, 10)).iter().all(|&v| v == 0.8));
        assert!(cov.cxy.columns(10, 40).iter().all(|&v| v == 0.0));
        assert_eq!(truth.orders(), 1);
    }

    #[test]
    fn setting_names_round_trip() {
        for s in [Setting::LowDim, Setting::HighDim, Setting::Runtime { q: 200 }] {
            assert_eq!(s.to_string().parse::<Setting>().unwrap(), s);
        }
        assert_eq!("runtime(50)".parse::<Setting>().unwrap(), Setting::Runtime { q: 50 });
        let err = "mid_dim".parse::<Setting>().unwrap_err().to_string();
        assert!(err.contains("low_dim"));
    }

    #[test]
    fn large_normal_sample_matches_sigma() {
        let (cov, _) = build_sigma(Setting::LowDim);
        let (x, y) = sample(&cov, 10_000, Distribution::Normal, 1).unwrap();
        let s = pearson_cov(&x.hstack(&y).unwrap()).unwrap().matrix;
        assert!((s - cov.full()).amax() < 0.05);
    }

    #[test]
    fn sampling_is_deterministic() {
        let (cov, _) = build_sigma(Setting::LowDim);
        let a = sample(&cov, 20, Distribution::T3, 9).unwrap();
        let b = sample(&cov, 20, Distribution::T3, 9).unwrap();
        assert_eq!(a.0.values(), b.0.values());
        assert_eq!(a.1.values(), b.1.values());
    }

    #[test]
    fn t3_scale_matches_quantile() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let (cov, _) = build_sigma(Setting::LowDim);
        let (x, _) = sample(&cov, 10_000, Distribution::T3, 4).unwrap();
        let col = x.column(0);
        // MAD of t₃ (scale 1) is its 0.75 quantile
        let q75 = StudentsT::new(0.0, 1.0, 3.0).unwrap().inverse_cdf(0.75);
        let mad = crate::covariance::raw_mad(&col).unwrap();
        assert!((mad / q75 - 1.0).abs() < 0.1, "mad {mad} vs {q75}");
    }

    #[test]
    fn contamination_replaces_rows() {
        let (cov, _) = build_sigma(Setting::LowDim);
        let (x, y) = sample(&cov, 100, Distribution::Normal, 3).unwrap();
        let (cx, cy) = contaminate(&x, &y, 0.0, 5.0, &cov, 1).unwrap();
        assert_eq!(cx.values(), x.values());
        assert_eq!(cy.values(), y.values());

        let (cx, _) = contaminate(&x, &y, 0.05, 5.0, &cov, 1).unwrap();
        let changed = (0..100)
            .filter(|&i| cx.values().row(i) != x.values().row(i))
            .count();
        assert_eq!(changed, 5);
        assert!(contaminate(&x, &y, 0.6, 5.0, &cov, 1).is_err());
    }

    #[test]
    fn contaminated_rows_are_shifted() {
        let (cov, _) = build_sigma(Setting::LowDim);
        let (x, y) = sample(&cov, 2000, Distribution::Normal, 8).unwrap();
        let (cx, cy) = contaminate(&x, &y, 0.5, 10.0, &cov, 2).unwrap();
        let mut total = 0.0;
        let mut count = 0.0;
        for i in 0..2000 {
            if cx.values().row(i) != x.values().row(i) {
                total += cx.values().row(i).sum() + cy.values().row(i).sum();
                count += 20.0;
            }
        }
        assert_eq!(count, 1000.0 * 20.0);
        assert!((total / count - 10.0).abs() < 0.05);
    }

    #[test]
    fn angle_examples() {
        let e1 = unit(3, 0);
        let e2 = unit(3, 1);
        assert_eq!(angle(&e1, &e1).unwrap(), 0.0);
        assert!((angle(&e1, &e2).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(angle(&e1, &(-&e1)).unwrap(), 0.0);
        assert!(angle(&e1, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn sparsity_examples() {
        let t = dvector![1.0, 1.0, 0.0, 0.0];
        assert_eq!(sparsity_rates(&t, &dvector![1.0, 0.0, 0.0, 0.0], 0.0).unwrap(), (0.5, 1.0));
        assert_eq!(sparsity_rates(&t, &t, 0.0).unwrap(), (1.0, 1.0));
        let mut truth = DVector::zeros(10);
        truth[1] = 1.0;
        let mut est = truth.clone();
        est[4] = 0.01;
        let (tpr, tnr) = sparsity_rates(&truth, &est, 0.0).unwrap();
        assert_eq!(tpr, 1.0);
        assert!((tnr - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(sparsity_rates(&dvector![0.0], &dvector![0.0], 0.0).unwrap(), (1.0, 1.0));
    }

    fn one_dim(values: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn residual_score_examples() {
        let dirs = vec![vec![DirectionPair::new(dvector![1.0], dvector![1.0])]];
        let x = one_dim(&[1.0, 2.0, 3.0]);
        assert_eq!(residual_score(&dirs, &x, &x, 0.0).unwrap(), 0.0);

        let y = one_dim(&[0.0, 0.0, 0.0]);
        assert!((residual_score(&dirs, &x, &y, 0.0).unwrap() - 14.0 / 3.0).abs() < 1e-12);

        let x = one_dim(&[1.0, 2.0, 100.0]);
        assert!((residual_score(&dirs, &x, &y, 1.0 / 3.0).unwrap() - 2.5).abs() < 1e-12);
        assert!(residual_score(&[], &x, &y, 0.0).is_err());
    }

    #[test]
    fn mean_se() {
        let s = MeanSe::of([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(MeanSe::of([2.0]).se, 0.0);
    }

    #[test]
    fn replicate_seeds_differ() {
        let seeds: Vec<u64> = (0..50).map(|r| replicate_seed(7, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 50);
        assert_eq!(replicate_seed(7, 3), seeds[3]);
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::new(Setting::LowDim);
        assert!(c.validate().is_ok());
        c.contamination_rate = 0.6;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn angle_symmetric_and_scale_invariant(
            v in proptest::collection::vec(-1.0..1.0f64, 4),
            w in proptest::collection::vec(-1.0..1.0f64, 4),
            s in 0.1..10.0f64,
        ) {
            let (v, w) = (DVector::from_vec(v), DVector::from_vec(w));
            prop_assume!(v.norm() > 1e-3 && w.norm() > 1e-3);
            let t = angle(&v, &w).unwrap();
            prop_assert!((t - angle(&w, &(&v * s)).unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&t));
        }

        #[test]
        fn rates_scale_invariant(
            t in proptest::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], 6),
            e in proptest::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], 6),
            s in 0.1..10.0f64,
        ) {
            let (t, e) = (DVector::from_vec(t), DVector::from_vec(e));
            let r = sparsity_rates(&t, &e, 0.0).unwrap();
            prop_assert_eq!(r, sparsity_rates(&t, &(&e * s), 0.0).unwrap());
            prop_assert!((0.0..=1.0).contains(&r.0) && (0.0..=1.0).contains(&r.1));
        }

        #[test]
        fn zero_trim_is_plain_mean(r in proptest::collection::vec(-5.0..5.0f64, 1..20)) {
            let dirs = vec![vec![DirectionPair::new(dvector![1.0], dvector![1.0])]];
            let x = one_dim(&r);
            let y = one_dim(&vec![0.0; r.len()]);
            let plain = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
            prop_assert_eq!(residual_score(&dirs, &x, &y, 0.0).unwrap(), plain);
        }
    }
}
