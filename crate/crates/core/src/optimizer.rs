//! Method-of-multipliers solver with an AMSGrad inner minimizer.
//!
//! Each outer iteration minimizes the augmented Lagrangian for fixed
//! multipliers with AMSGrad, zeroes coefficients that are no larger than the
//! recent step sizes (mean + 2·sd of the last `window` relative steps),
//! rescales both directions to unit variance, and updates the multipliers.
//! The quadratic penalty strength grows by `growth` whenever the constraint
//! residual fails to shrink by the factor `trigger`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::JointCovariance;
use crate::error::{Error, Result};
use crate::linalg::argmax_abs;
use crate::problem::{ConstraintMode, DirectionPair, MaxAssocProblem, MultiplierState, PenaltyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    #[default]
    Naive,
    Orthogonal,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(InitMode::Naive),
            "orthogonal" => Ok(InitMode::Orthogonal),
            other => Err(Error::Config(format!(
                "unknown init mode {other:?} (expected naive or orthogonal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPlacement {
    /// After every inner minimization.
    #[default]
    EveryInner,
    /// Once, after the outer loop has finished.
    FinalOnly,
}

/// Starting multipliers of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierStart {
    /// Constraint residuals at the unit-variance start, clamped at 0 on
    /// inequality rows.
    Residual,
    /// All zero. Far more stable when the start badly violates a penalty
    /// bound, e.g. dense starts in high dimension.
    #[default]
    Zero,
}

impl std::str::FromStr for MultiplierStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "residual" => Ok(Self::Residual),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Config(format!(
                "unknown multiplier start {other:?} (expected residual or zero)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// First-moment decay.
    pub eta1: f64,
    /// Second-moment decay.
    pub eta2: f64,
    /// Base learning rate.
    pub alpha0: f64,
    /// Learning-rate decay: step `i` uses `alpha0 / (1 + lr_decay · i)`.
    pub lr_decay: f64,
    pub epsilon: f64,
    /// Inner stop on the subgradient norm.
    pub delta_inner: f64,
    /// Outer stop on the multiplier change.
    pub delta_outer: f64,
    /// Inner stop when the relative iterate change stays below this for
    /// `window` consecutive iterations.
    pub stall_tol: f64,
    /// Number of recent step sizes used by the threshold.
    pub window: usize,
    pub c0: f64,
    pub growth: f64,
    pub trigger: f64,
    pub c_max: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Constraint tolerance required for a converged result.
    pub feasibility_tol: f64,
    pub threshold: ThresholdPlacement,
    pub mode: ConstraintMode,
    pub multiplier_start: MultiplierStart,
    /// Seed for the random fallback of the orthogonal start.
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            eta1: 0.9,
            eta2: 0.999,
            alpha0: 0.01,
            lr_decay: 0.0,
            epsilon: 1e-8,
            delta_inner: 1e-6,
            delta_outer: 1e-4,
            stall_tol: 1e-9,
            window: 10,
            c0: 1.0,
            growth: 10.0,
            trigger: 0.25,
            c_max: 1e6,
            max_inner: 5000,
            max_outer: 100,
            feasibility_tol: 1e-4,
            threshold: ThresholdPlacement::EveryInner,
            mode: ConstraintMode::Inequality,
            multiplier_start: MultiplierStart::Zero,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.eta1 > 0.0 && self.eta1 < 1.0) {
            return bad("eta1 must lie in (0, 1)");
        }
        if !(self.eta2 > 0.0 && self.eta2 < 1.0) {
            return bad("eta2 must lie in (0, 1)");
        }
        if !(self.alpha0 > 0.0) {
            return bad("alpha0 must be positive");
        }
        if !(self.lr_decay >= 0.0) {
            return bad("lr_decay must be nonnegative");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if !(self.growth > 1.0) {
            return bad("growth must exceed 1");
        }
        if !(self.trigger > 0.0 && self.trigger < 1.0) {
            return bad("trigger must lie in (0, 1)");
        }
        if !(self.c0 > 0.0) || !(self.c_max >= self.c0) {
            return bad("need 0 < c0 <= c_max");
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be positive");
        }
        if !(self.delta_inner >= 0.0 && self.delta_outer > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

/// Moment estimates of one AMSGrad run.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsgradState {
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    pub v_hat: DVector<f64>,
    pub iteration: usize,
}

impl AmsgradState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            v_hat: DVector::zeros(dim),
            iteration: 0,
        }
    }

    /// Applies one update for gradient `g` and returns the step to subtract.
    pub fn step(&mut self, g: &DVector<f64>, settings: &OptimizerSettings) -> DVector<f64> {
        self.iteration += 1;
        let (e1, e2) = (settings.eta1, settings.eta2);
        let lr = settings.alpha0 / (1.0 + settings.lr_decay * (self.iteration - 1) as f64);
        let mut step = DVector::zeros(g.len());
        for i in 0..g.len() {
            self.m[i] = e1 * self.m[i] + (1.0 - e1) * g[i];
            self.v[i] = e2 * self.v[i] + (1.0 - e2) * g[i] * g[i];
            self.v_hat[i] = self.v_hat[i].max(self.v[i]);
            step[i] = lr * self.m[i] / (self.v_hat[i].sqrt() + settings.epsilon);
        }
        step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStop {
    GradientNorm,
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct InnerReport {
    pub iterations: usize,
    pub grad_norm: f64,
    pub stop: InnerStop,
    /// Relative step sizes of a and b for the last `window` iterations.
    pub steps_a: Vec<f64>,
    pub steps_b: Vec<f64>,
}

fn relative_step(delta: &DVector<f64>, prev: &DVector<f64>) -> f64 {
    let denom = prev.norm();
    if denom > 0.0 {
        delta.norm() / denom
    } else {
        delta.norm()
    }
}

/// AMSGrad on an arbitrary (sub)gradient oracle over a pair of blocks.
pub fn amsgrad_with<G>(
    start: &DirectionPair,
    mut grad: G,
    settings: &OptimizerSettings,
) -> Result<(DirectionPair, InnerReport)>
where
    G: FnMut(&DirectionPair) -> Result<DirectionPair>,
{
    let p = start.a.len();
    let q = start.b.len();
    let mut state = AmsgradState::new(p + q);
    let mut x = start.clone();
    let mut steps_a = VecDeque::with_capacity(settings.window);
    let mut steps_b = VecDeque::with_capacity(settings.window);
    let mut stall = 0usize;
    let mut grad_norm = f64::INFINITY;
    let mut stop = InnerStop::MaxIterations;
    let mut iterations = 0;
    let mut flat = DVector::zeros(p + q);

    for i in 1..=settings.max_inner {
        iterations = i;
        let g = grad(&x)?;
        if !g.is_finite() {
            return Err(Error::Divergence { iteration: i });
        }
        grad_norm = g.norm();
        if grad_norm <= settings.delta_inner {
            stop = InnerStop::GradientNorm;
            break;
        }
        flat.rows_mut(0, p).copy_from(&g.a);
        flat.rows_mut(p, q).copy_from(&g.b);
        let step = state.step(&flat, settings);
        let da = step.rows(0, p).into_owned();
        let db = step.rows(p, q).into_owned();

        let ra = relative_step(&da, &x.a);
        let rb = relative_step(&db, &x.b);
        if steps_a.len() == settings.window {
            steps_a.pop_front();
            steps_b.pop_front();
        }
        steps_a.push_back(ra);
        steps_b.push_back(rb);

        let total = (da.norm_squared() + db.norm_squared()).sqrt();
        let scale = x.norm();
        x.a -= &da;
        x.b -= &db;
        if !x.is_finite() {
            return Err(Error::Divergence { iteration: i });
        }
        let rel = if scale > 0.0 { total / scale } else { total };
        if rel < settings.stall_tol {
            stall += 1;
            if stall >= settings.window {
                stop = InnerStop::Stalled;
                break;
            }
        } else {
            stall = 0;
        }
    }
    Ok((
        x,
        InnerReport {
            iterations,
            grad_norm,
            stop,
            steps_a: steps_a.into(),
            steps_b: steps_b.into(),
        },
    ))
}

/// Minimizes the augmented Lagrangian for fixed multipliers.
pub fn amsgrad_minimize(
    problem: &MaxAssocProblem<'_>,
    mult: &MultiplierState,
    start: &DirectionPair,
    settings: &OptimizerSettings,
) -> Result<(DirectionPair, InnerReport)> {
    amsgrad_with(start, |pair| problem.al_subgradient(pair, mult), settings)
}

/// `mean + 2·sd` (population sd) of the last `window` entries; 0 when empty.
pub fn step_threshold(history: &[f64], window: usize) -> f64 {
    let start = history.len().saturating_sub(window.max(1));
    let recent = &history[start..];
    if recent.is_empty() {
        return 0.0;
    }
    let n = recent.len() as f64;
    let mean = recent.iter().sum::<f64>() / n;
    let var = recent.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    mean + 2.0 * var.sqrt()
}

fn zero_small(u: &DVector<f64>, t: f64) -> DVector<f64> {
    let out = u.map(|v| if v.abs() > t { v } else { 0.0 });
    // never wipe out a whole direction
    if out.iter().all(|&v| v == 0.0) && u.iter().any(|&v| v != 0.0) {
        u.clone()
    } else {
        out
    }
}

/// Zeroes every coefficient whose magnitude does not exceed the
/// moving-average step threshold of its block.
pub fn threshold(
    pair: &DirectionPair,
    steps_a: &[f64],
    steps_b: &[f64],
    window: usize,
) -> DirectionPair {
    DirectionPair {
        a: zero_small(&pair.a, step_threshold(steps_a, window)),
        b: zero_small(&pair.b, step_threshold(steps_b, window)),
    }
}

/// Row means of `Cxy` for `a`, column means for `b`. The flag is set when the
/// start is degenerate (`Cxy ≈ 0`) and was replaced by uniform vectors.
pub fn init_naive(cov: &JointCovariance) -> (DirectionPair, bool) {
    let (p, q) = (cov.p(), cov.q());
    let a = DVector::from_fn(p, |i, _| cov.cxy.row(i).sum() / q as f64);
    let b = DVector::from_fn(q, |j, _| cov.cxy.column(j).sum() / p as f64);
    let degenerate_a = a.iter().all(|v| v.abs() <= 1e-14);
    let degenerate_b = b.iter().all(|v| v.abs() <= 1e-14);
    let a = if degenerate_a {
        DVector::from_element(p, 1.0 / (p as f64).sqrt())
    } else {
        a
    };
    let b = if degenerate_b {
        DVector::from_element(q, 1.0 / (q as f64).sqrt())
    } else {
        b
    };
    if degenerate_a || degenerate_b {
        log::warn!("naive start is degenerate (Cxy ≈ 0); using uniform vectors");
    }
    (DirectionPair { a, b }, degenerate_a || degenerate_b)
}

/// Euclidean projection of `v` onto `{u : u'w_i = 0}`.
fn project_out(v: &DVector<f64>, ws: &[DVector<f64>]) -> DVector<f64> {
    if ws.is_empty() {
        return v.clone();
    }
    let w = DMatrix::from_columns(ws);
    let gram = w.tr_mul(&w);
    let rhs = w.tr_mul(v);
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .pseudo_inverse(1e-12)
            .map(|pinv| pinv * &rhs)
            .unwrap_or_else(|_| DVector::zeros(ws.len())),
    };
    v - w * coef
}

fn projected_or_random(
    v: &DVector<f64>,
    ws: &[DVector<f64>],
    rng: &mut ChaCha8Rng,
) -> (DVector<f64>, bool) {
    let proj = project_out(v, ws);
    if proj.norm() > 1e-10 * v.norm().max(1.0) {
        return (proj, false);
    }
    for _ in 0..16 {
        let r = DVector::from_fn(v.len(), |_, _| StandardNormal.sample(rng));
        let proj = project_out(&r, ws);
        if proj.norm() > 1e-10 * r.norm() {
            return (proj, true);
        }
    }
    (DVector::zeros(v.len()), true)
}

/// Projects the naive start onto the complements of the previous directions
/// in the `Cxx` / `Cyy` inner products. The flag reports a zero projection
/// that was replaced by a projected random vector.
pub fn init_orthogonal(
    cov: &JointCovariance,
    prev_a: &[DVector<f64>],
    prev_b: &[DVector<f64>],
    naive: &DirectionPair,
    seed: u64,
) -> (DirectionPair, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wa: Vec<_> = prev_a.iter().map(|v| &cov.cxx * v).collect();
    let wb: Vec<_> = prev_b.iter().map(|v| &cov.cyy * v).collect();
    let (a, da) = projected_or_random(&naive.a, &wa, &mut rng);
    let (b, db) = projected_or_random(&naive.b, &wb, &mut rng);
    (DirectionPair { a, b }, da || db)
}

fn unit_variance(u: &DVector<f64>, c: &DMatrix<f64>) -> DVector<f64> {
    let s = u.dot(&(c * u));
    if s > 0.0 {
        u / s.sqrt()
    } else {
        u.clone()
    }
}

/// Largest-magnitude entry of `a` positive, `b` flipped so that `a'Cxy b ≥ 0`.
pub fn apply_sign_convention(pair: &mut DirectionPair, cov: &JointCovariance) {
    if !pair.a.is_empty() && pair.a[argmax_abs(&pair.a)] < 0.0 {
        pair.a = -&pair.a;
    }
    if pair.a.dot(&(&cov.cxy * &pair.b)) < 0.0 {
        pair.b = -&pair.b;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_c: f64,
    /// Norm of the constraint residual vector at the returned point.
    pub residual_norm: f64,
    pub max_inequality_violation: f64,
    pub max_equality_residual: f64,
    pub multiplier_change: f64,
    pub converged: bool,
    pub degenerate_start: bool,
    /// Penalty strength after every outer iteration.
    pub c_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub pair: DirectionPair,
    pub multipliers: MultiplierState,
    pub diagnostics: SolveDiagnostics,
}

fn max_violation(problem: &MaxAssocProblem<'_>, pair: &DirectionPair) -> Result<f64> {
    let (ineq, eq) = problem.violations(pair)?;
    Ok(ineq.max(eq))
}

/// Method-of-multipliers outer loop for one order.
pub fn mm_solve(
    problem: &MaxAssocProblem<'_>,
    start: &DirectionPair,
    settings: &OptimizerSettings,
) -> Result<SolveOutcome> {
    settings.validate()?;
    let cov = problem.cov();
    // Multipliers start from the residuals of the unit-variance start; an
    // unscaled start would seed the variance rows with multipliers that the
    // renormalized iterates can never correct.
    let mut pair = DirectionPair {
        a: unit_variance(&start.a, &cov.cxx),
        b: unit_variance(&start.b, &cov.cyy),
    };
    let mut mult = problem.initial_multipliers(&pair, settings.c0)?;
    if settings.multiplier_start == MultiplierStart::Zero {
        mult.lambda.fill(0.0);
    }
    let mut residual = problem.effective_residual(&pair, &mult)?.norm();
    let mut best: Option<(f64, DirectionPair, MultiplierState)> = None;
    let mut last_report: Option<InnerReport> = None;
    let mut inner_total = 0;
    let mut outer = 0;
    let mut delta = f64::INFINITY;
    let mut converged = false;
    let mut c_history = Vec::new();

    while outer < settings.max_outer {
        outer += 1;
        let (mut next, report) = amsgrad_minimize(problem, &mult, &pair, settings)?;
        inner_total += report.iterations;
        if settings.threshold == ThresholdPlacement::EveryInner {
            next = threshold(&next, &report.steps_a, &report.steps_b, settings.window);
        }
        next.a = unit_variance(&next.a, &cov.cxx);
        next.b = unit_variance(&next.b, &cov.cyy);
        last_report = Some(report);

        let new_residual = problem.effective_residual(&next, &mult)?.norm();
        let lambda = problem.updated_multipliers(&next, &mult)?;
        delta = (&lambda - &mult.lambda).norm();
        mult.lambda = lambda;
        pair = next;

        let violation = max_violation(problem, &pair)?;
        if best.as_ref().is_none_or(|(v, _, _)| violation < *v) {
            best = Some((violation, pair.clone(), mult.clone()));
        }
        if delta <= settings.delta_outer && violation <= settings.feasibility_tol {
            converged = true;
            c_history.push(mult.c);
            break;
        }
        if new_residual > settings.trigger * residual {
            if mult.c >= settings.c_max {
                c_history.push(mult.c);
                log::debug!("penalty strength reached c_max = {}", settings.c_max);
                break;
            }
            mult.c = (mult.c * settings.growth).min(settings.c_max);
        }
        residual = new_residual;
        c_history.push(mult.c);
    }

    if settings.threshold == ThresholdPlacement::FinalOnly {
        if let Some(r) = &last_report {
            pair = threshold(&pair, &r.steps_a, &r.steps_b, settings.window);
            pair.a = unit_variance(&pair.a, &cov.cxx);
            pair.b = unit_variance(&pair.b, &cov.cyy);
            converged = converged && max_violation(problem, &pair)? <= settings.feasibility_tol;
        }
    }
    if !converged {
        if let Some((_, p, m)) = best {
            pair = p;
            let c = mult.c;
            mult = m;
            mult.c = c;
        }
    }

    let h = problem.constraints(&pair)?;
    let (ineq, eq) = problem.violations(&pair)?;
    Ok(SolveOutcome {
        pair,
        multipliers: mult.clone(),
        diagnostics: SolveDiagnostics {
            outer_iterations: outer,
            inner_iterations: inner_total,
            final_c: mult.c,
            residual_norm: h.norm(),
            max_inequality_violation: ineq,
            max_equality_residual: eq,
            multiplier_change: delta,
            converged,
            degenerate_start: false,
            c_history,
        },
    })
}

/// Penalty settings for each order; a single entry is reused for all orders.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderPenalties(pub Vec<(PenaltyConfig, PenaltyConfig)>);

impl OrderPenalties {
    pub fn uniform(pen_a: PenaltyConfig, pen_b: PenaltyConfig) -> Self {
        Self(vec![(pen_a, pen_b)])
    }

    pub fn for_order(&self, k: usize) -> Result<(PenaltyConfig, PenaltyConfig)> {
        match self.0.len() {
            0 => Err(Error::Config("no penalty configuration given".into())),
            1 => Ok(self.0[0]),
            n if k <= n => Ok(self.0[k - 1]),
            n => Err(Error::Config(format!(
                "penalties given for {n} orders, order {k} requested"
            ))),
        }
    }
}

/// Solution of a single order.
#[derive(Debug, Clone)]
pub struct OrderFit {
    pub pair: DirectionPair,
    pub association: f64,
    pub multipliers: MultiplierState,
    pub diagnostics: SolveDiagnostics,
    pub nonzeros: (usize, usize),
}

#[derive(Debug, Clone, Default)]
pub struct FitResult {
    pub directions: Vec<DirectionPair>,
    pub associations: Vec<f64>,
    pub multipliers: Vec<MultiplierState>,
    pub diagnostics: Vec<SolveDiagnostics>,
    pub nonzero_counts: Vec<(usize, usize)>,
    /// Set when an order could not be solved; earlier orders are retained.
    pub failure: Option<String>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.failure.is_none() && self.diagnostics.iter().all(|d| d.converged)
    }

    pub fn orders(&self) -> usize {
        self.directions.len()
    }

    pub fn push(&mut self, order: OrderFit) {
        self.directions.push(order.pair);
        self.associations.push(order.association);
        self.multipliers.push(order.multipliers);
        self.diagnostics.push(order.diagnostics);
        self.nonzero_counts.push(order.nonzeros);
    }

    pub fn prev_a(&self) -> Vec<DVector<f64>> {
        self.directions.iter().map(|d| d.a.clone()).collect()
    }

    pub fn prev_b(&self) -> Vec<DVector<f64>> {
        self.directions.iter().map(|d| d.b.clone()).collect()
    }
}

fn nonzeros(v: &DVector<f64>) -> usize {
    v.iter().filter(|&&x| x != 0.0).count()
}

fn check_orders(cov: &JointCovariance, orders: usize) -> Result<()> {
    let m = cov.p().min(cov.q());
    if orders == 0 || orders > m {
        return Err(Error::Dimension(format!(
            "orders must lie in 1..={m}, got {orders}"
        )));
    }
    Ok(())
}

/// Solves the next order given the previously extracted directions.
pub fn solve_order(
    cov: &JointCovariance,
    prev_a: &[DVector<f64>],
    prev_b: &[DVector<f64>],
    pen_a: PenaltyConfig,
    pen_b: PenaltyConfig,
    settings: &OptimizerSettings,
    init: InitMode,
) -> Result<OrderFit> {
    let problem = MaxAssocProblem::new(cov, prev_a.to_vec(), prev_b.to_vec(), pen_a, pen_b)?
        .with_mode(settings.mode);
    let (naive, naive_degenerate) = init_naive(cov);
    let k = prev_a.len() + 1;
    let (start, degenerate) = if k == 1 || init == InitMode::Naive {
        (naive, naive_degenerate)
    } else {
        let (s, d) = init_orthogonal(cov, prev_a, prev_b, &naive, settings.seed ^ k as u64);
        (s, d || naive_degenerate)
    };
    let mut solved = mm_solve(&problem, &start, settings)?;
    solved.diagnostics.degenerate_start = degenerate;
    apply_sign_convention(&mut solved.pair, cov);
    let association = problem.objective(&solved.pair)?;
    Ok(OrderFit {
        nonzeros: (nonzeros(&solved.pair.a), nonzeros(&solved.pair.b)),
        association,
        pair: solved.pair,
        multipliers: solved.multipliers,
        diagnostics: solved.diagnostics,
    })
}

/// Solves orders `1..=orders` sequentially, each constrained to be
/// uncorrelated with the previous ones.
pub fn fit(
    cov: &JointCovariance,
    orders: usize,
    penalties: &OrderPenalties,
    settings: &OptimizerSettings,
    init: InitMode,
) -> Result<FitResult> {
    settings.validate()?;
    check_orders(cov, orders)?;
    for k in 1..=orders {
        let (a, b) = penalties.for_order(k)?;
        a.validate()?;
        b.validate()?;
    }
    let mut out = FitResult::default();
    for k in 1..=orders {
        let (pen_a, pen_b) = penalties.for_order(k)?;
        let solved = solve_order(
            cov,
            &out.prev_a(),
            &out.prev_b(),
            pen_a,
            pen_b,
            settings,
            init,
        );
        match solved {
            Ok(o) => out.push(o),
            Err(e) => {
                out.failure = Some(format!("order {k}: {e}"));
                break;
            }
        }
    }
    Ok(out)
}
