//! The order-k constrained maximum-association problem.
//!
//! Minimize `−a'Cxy b` subject to
//!
//! | row            | residual                | kind       |
//! |----------------|-------------------------|------------|
//! | variance a     | `a'Cxx a − 1`           | inequality |
//! | variance b     | `b'Cyy b − 1`           | inequality |
//! | orthogonal a_i | `a'Cxx a_i`, i < k      | equality   |
//! | orthogonal b_i | `b'Cyy b_i`, i < k      | equality   |
//! | penalty a      | `P_a(a) − c_a`          | inequality |
//! | penalty b      | `P_b(b) − c_b`          | inequality |
//!
//! Inequality rows enter the augmented Lagrangian in the
//! Powell–Hestenes–Rockafellar form `(max(0, λ + c·h)² − λ²) / 2c`, which is
//! `λ·r + (c/2)·r²` with `r = max(h, −λ/c)`. [`ConstraintMode::Equality`]
//! treats every row as an equality instead.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::covariance::JointCovariance;
use crate::error::{Error, Result};

/// Elastic-net constraint `α‖u‖₁ + (1−α)‖u‖₂ ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub bound: f64,
}

impl PenaltyConfig {
    pub fn new(alpha: f64, bound: f64) -> Result<Self> {
        let cfg = Self { alpha, bound };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "elastic-net mixing must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.bound > 0.0) || !self.bound.is_finite() {
            return Err(Error::Config(format!(
                "penalty bound must be positive and finite, got {}",
                self.bound
            )));
        }
        Ok(())
    }
}

/// Candidate coefficient vectors for x and y.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionPair {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl DirectionPair {
    pub fn new(a: DVector<f64>, b: DVector<f64>) -> Self {
        Self { a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_squared() + self.b.norm_squared()).sqrt()
    }
}

/// Lagrange multipliers (one per constraint row) and the quadratic penalty
/// strength.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub lambda: DVector<f64>,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Variance and penalty rows are inequalities.
    #[default]
    Inequality,
    /// Every row is an equality, with the plain multiplier update `λ + c·h`.
    Equality,
}

/// `α‖u‖₁ + (1−α)‖u‖₂`.
pub fn elastic_net(u: &DVector<f64>, cfg: &PenaltyConfig) -> f64 {
    cfg.alpha * u.lp_norm(1) + (1.0 - cfg.alpha) * u.norm()
}

/// A subgradient of [`elastic_net`], choosing 0 for the L1 part at zero
/// coordinates. The flag reports `u = 0` with a nonzero L2 weight, where the
/// zero vector is returned.
pub fn penalty_subgradient(u: &DVector<f64>, cfg: &PenaltyConfig) -> (DVector<f64>, bool) {
    let norm = u.norm();
    let l2 = 1.0 - cfg.alpha;
    let degenerate = norm == 0.0 && l2 > 0.0;
    let g = u.map(|v| {
        let l1 = if v == 0.0 { 0.0 } else { v.signum() };
        let l2_part = if norm > 0.0 { v / norm } else { 0.0 };
        cfg.alpha * l1 + l2 * l2_part
    });
    (g, degenerate)
}

/// `(value, coefficient)` of one augmented-Lagrangian row; the gradient of the
/// row's contribution is `coefficient · ∇h`.
fn row_term(h: f64, lambda: f64, c: f64, inequality: bool) -> (f64, f64) {
    if inequality {
        if c > 0.0 {
            let s = (lambda + c * h).max(0.0);
            ((s * s - lambda * lambda) / (2.0 * c), s)
        } else {
            let l = lambda.max(0.0);
            (l * h, l)
        }
    } else {
        (lambda * h + 0.5 * c * h * h, lambda + c * h)
    }
}

/// One order-k problem over a fixed covariance.
#[derive(Debug, Clone)]
pub struct MaxAssocProblem<'a> {
    cov: &'a JointCovariance,
    prev_a: Vec<DVector<f64>>,
    prev_b: Vec<DVector<f64>>,
    // Cxx a_i and Cyy b_i for the previous directions
    wa: Vec<DVector<f64>>,
    wb: Vec<DVector<f64>>,
    pen_a: PenaltyConfig,
    pen_b: PenaltyConfig,
    mode: ConstraintMode,
}

/// Values needed by several evaluations at one point.
struct Products {
    cxx_a: DVector<f64>,
    cyy_b: DVector<f64>,
    cxy_b: DVector<f64>,
    cyx_a: DVector<f64>,
}

impl<'a> MaxAssocProblem<'a> {
    pub fn new(
        cov: &'a JointCovariance,
        prev_a: Vec<DVector<f64>>,
        prev_b: Vec<DVector<f64>>,
        pen_a: PenaltyConfig,
        pen_b: PenaltyConfig,
    ) -> Result<Self> {
        pen_a.validate()?;
        pen_b.validate()?;
        let (p, q) = (cov.p(), cov.q());
        if prev_a.len() != prev_b.len() {
            return Err(Error::Dimension(format!(
                "{} previous a-directions but {} previous b-directions",
                prev_a.len(),
                prev_b.len()
            )));
        }
        let order = prev_a.len() + 1;
        if order > p.min(q) {
            return Err(Error::Dimension(format!(
                "order {order} exceeds min(p, q) = {}",
                p.min(q)
            )));
        }
        if prev_a.iter().any(|v| v.len() != p) || prev_b.iter().any(|v| v.len() != q) {
            return Err(Error::Dimension("previous direction has wrong length".into()));
        }
        let wa: Vec<_> = prev_a.iter().map(|v| &cov.cxx * v).collect();
        let wb: Vec<_> = prev_b.iter().map(|v| &cov.cyy * v).collect();
        for (v, w) in prev_a.iter().zip(&wa).chain(prev_b.iter().zip(&wb)) {
            let norm = v.dot(w);
            if (norm - 1.0).abs() > 1e-4 {
                return Err(Error::Domain(format!(
                    "previous direction is not unit-variance (v'Cv = {norm})"
                )));
            }
        }
        Ok(Self {
            cov,
            prev_a,
            prev_b,
            wa,
            wb,
            pen_a,
            pen_b,
            mode: ConstraintMode::Inequality,
        })
    }

    /// First-order problem.
    pub fn first(cov: &'a JointCovariance, pen_a: PenaltyConfig, pen_b: PenaltyConfig) -> Result<Self> {
        Self::new(cov, Vec::new(), Vec::new(), pen_a, pen_b)
    }

    pub fn with_mode(mut self, mode: ConstraintMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn cov(&self) -> &JointCovariance {
        self.cov
    }

    pub fn order(&self) -> usize {
        self.prev_a.len() + 1
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn pen_a(&self) -> &PenaltyConfig {
        &self.pen_a
    }

    pub fn pen_b(&self) -> &PenaltyConfig {
        &self.pen_b
    }

    pub fn prev_a(&self) -> &[DVector<f64>] {
        &self.prev_a
    }

    pub fn prev_b(&self) -> &[DVector<f64>] {
        &self.prev_b
    }

    /// Number of constraint rows, `2k + 2`.
    pub fn n_constraints(&self) -> usize {
        2 * self.order() + 2
    }

    /// Whether row `i` is an inequality under the current mode.
    pub fn is_inequality(&self, i: usize) -> bool {
        if self.mode == ConstraintMode::Equality {
            return false;
        }
        let m = self.n_constraints();
        i < 2 || i >= m - 2
    }

    fn check(&self, pair: &DirectionPair) -> Result<()> {
        if pair.a.len() != self.cov.p() || pair.b.len() != self.cov.q() {
            return Err(Error::Dimension(format!(
                "pair has lengths ({}, {}), problem expects ({}, {})",
                pair.a.len(),
                pair.b.len(),
                self.cov.p(),
                self.cov.q()
            )));
        }
        Ok(())
    }

    fn check_mult(&self, mult: &MultiplierState) -> Result<()> {
        if mult.lambda.len() != self.n_constraints() {
            return Err(Error::Dimension(format!(
                "{} multipliers for {} constraints",
                mult.lambda.len(),
                self.n_constraints()
            )));
        }
        Ok(())
    }

    fn products(&self, pair: &DirectionPair) -> Products {
        Products {
            cxx_a: &self.cov.cxx * &pair.a,
            cyy_b: &self.cov.cyy * &pair.b,
            cxy_b: &self.cov.cxy * &pair.b,
            cyx_a: self.cov.cxy.tr_mul(&pair.a),
        }
    }

    /// The association `a'Cxy b`.
    pub fn objective(&self, pair: &DirectionPair) -> Result<f64> {
        self.check(pair)?;
        Ok(pair.a.dot(&(&self.cov.cxy * &pair.b)))
    }

    fn residuals_from(&self, pair: &DirectionPair, pr: &Products) -> DVector<f64> {
        let k1 = self.order() - 1;
        let mut h = DVector::zeros(self.n_constraints());
        h[0] = pair.a.dot(&pr.cxx_a) - 1.0;
        h[1] = pair.b.dot(&pr.cyy_b) - 1.0;
        for i in 0..k1 {
            h[2 + i] = pair.a.dot(&self.wa[i]);
            h[2 + k1 + i] = pair.b.dot(&self.wb[i]);
        }
        h[2 + 2 * k1] = elastic_net(&pair.a, &self.pen_a) - self.pen_a.bound;
        h[3 + 2 * k1] = elastic_net(&pair.b, &self.pen_b) - self.pen_b.bound;
        h
    }

    /// Constraint residuals ordered
    /// `[var_a, var_b, orth_a…, orth_b…, pen_a, pen_b]`.
    pub fn constraints(&self, pair: &DirectionPair) -> Result<DVector<f64>> {
        self.check(pair)?;
        Ok(self.residuals_from(pair, &self.products(pair)))
    }

    /// Augmented Lagrangian `−F + Σ row terms`.
    pub fn augmented_lagrangian(&self, pair: &DirectionPair, mult: &MultiplierState) -> Result<f64> {
        Ok(self.evaluate(pair, mult)?.0)
    }

    /// Subgradient of the augmented Lagrangian with respect to `(a, b)`.
    pub fn al_subgradient(&self, pair: &DirectionPair, mult: &MultiplierState) -> Result<DirectionPair> {
        Ok(self.evaluate(pair, mult)?.1)
    }

    /// Value and subgradient of the augmented Lagrangian in one pass.
    pub fn evaluate(
        &self,
        pair: &DirectionPair,
        mult: &MultiplierState,
    ) -> Result<(f64, DirectionPair)> {
        self.check(pair)?;
        self.check_mult(mult)?;
        let pr = self.products(pair);
        let h = self.residuals_from(pair, &pr);
        let k1 = self.order() - 1;
        let m = self.n_constraints();

        let mut value = -pair.a.dot(&pr.cxy_b);
        let mut ga = -&pr.cxy_b;
        let mut gb = -&pr.cyx_a;
        let mut coef = vec![0.0; m];
        for i in 0..m {
            let (v, s) = row_term(h[i], mult.lambda[i], mult.c, self.is_inequality(i));
            value += v;
            coef[i] = s;
        }
        ga.axpy(2.0 * coef[0], &pr.cxx_a, 1.0);
        gb.axpy(2.0 * coef[1], &pr.cyy_b, 1.0);
        for i in 0..k1 {
            ga.axpy(coef[2 + i], &self.wa[i], 1.0);
            gb.axpy(coef[2 + k1 + i], &self.wb[i], 1.0);
        }
        let (sa, _) = penalty_subgradient(&pair.a, &self.pen_a);
        let (sb, _) = penalty_subgradient(&pair.b, &self.pen_b);
        ga.axpy(coef[m - 2], &sa, 1.0);
        gb.axpy(coef[m - 1], &sb, 1.0);
        Ok((value, DirectionPair { a: ga, b: gb }))
    }

    /// Multipliers evaluated at a starting point, `λ⁰ = H(a⁰, b⁰)`, with the
    /// inequality rows clamped at zero.
    pub fn initial_multipliers(&self, pair: &DirectionPair, c: f64) -> Result<MultiplierState> {
        let h = self.constraints(pair)?;
        let lambda = DVector::from_fn(h.len(), |i, _| {
            if self.is_inequality(i) {
                h[i].max(0.0)
            } else {
                h[i]
            }
        });
        Ok(MultiplierState { lambda, c })
    }

    /// First-order multiplier update: `max(0, λ + c·h)` on inequality rows,
    /// `λ + c·h` on equality rows.
    pub fn updated_multipliers(
        &self,
        pair: &DirectionPair,
        mult: &MultiplierState,
    ) -> Result<DVector<f64>> {
        self.check_mult(mult)?;
        let h = self.constraints(pair)?;
        Ok(DVector::from_fn(h.len(), |i, _| {
            let raw = mult.lambda[i] + mult.c * h[i];
            if self.is_inequality(i) {
                raw.max(0.0)
            } else {
                raw
            }
        }))
    }

    /// Constraint residual as seen by the multiplier method: `h` on equality
    /// rows, `max(h, −λ/c)` on inequality rows.
    pub fn effective_residual(
        &self,
        pair: &DirectionPair,
        mult: &MultiplierState,
    ) -> Result<DVector<f64>> {
        self.check_mult(mult)?;
        let h = self.constraints(pair)?;
        Ok(DVector::from_fn(h.len(), |i, _| {
            if self.is_inequality(i) {
                if mult.c > 0.0 {
                    h[i].max(-mult.lambda[i] / mult.c)
                } else {
                    h[i].max(0.0)
                }
            } else {
                h[i]
            }
        }))
    }

    /// Largest inequality violation and largest absolute equality residual.
    pub fn violations(&self, pair: &DirectionPair) -> Result<(f64, f64)> {
        let h = self.constraints(pair)?;
        let mut ineq = 0.0_f64;
        let mut eq = 0.0_f64;
        for i in 0..h.len() {
            if self.is_inequality(i) {
                ineq = ineq.max(h[i]);
            } else {
                eq = eq.max(h[i].abs());
            }
        }
        Ok((ineq, eq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, DMatrix};
    use proptest::prelude::*;

    fn setting1() -> JointCovariance {
        let mut cxy = DMatrix::zeros(10, 10);
        cxy[(0, 0)] = 0.9;
        cxy[(1, 1)] = 0.7;
        JointCovariance::from_blocks(DMatrix::identity(10, 10), DMatrix::identity(10, 10), cxy)
            .unwrap()
    }

    fn e(n: usize, i: usize) -> DVector<f64> {
        crate::linalg::unit(n, i)
    }

    fn loose() -> PenaltyConfig {
        PenaltyConfig::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn objective_examples() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        let f = prob.objective(&DirectionPair::new(e(10, 0), e(10, 0))).unwrap();
        assert!((f - 0.9).abs() < 1e-15);
        let zero = prob
            .objective(&DirectionPair::new(DVector::zeros(10), e(10, 3)))
            .unwrap();
        assert_eq!(zero, 0.0);

        let id = JointCovariance::from_blocks(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let p2 = MaxAssocProblem::first(&id, loose(), loose()).unwrap();
        let off = p2
            .objective(&DirectionPair::new(dvector![1.0, 0.0], dvector![0.0, 1.0]))
            .unwrap();
        assert_eq!(off, 0.0);
    }

    #[test]
    fn objective_dimension_mismatch() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        assert!(prob
            .objective(&DirectionPair::new(e(3, 0), e(10, 0)))
            .is_err());
    }

    #[test]
    fn elastic_net_examples() {
        let l1 = PenaltyConfig::new(1.0, 1.0).unwrap();
        let l2 = PenaltyConfig::new(0.0, 1.0).unwrap();
        let mix = PenaltyConfig::new(0.5, 1.0).unwrap();
        assert_eq!(elastic_net(&dvector![0.5, -0.5], &l1), 1.0);
        assert_eq!(elastic_net(&dvector![3.0, 4.0], &l2), 5.0);
        assert_eq!(elastic_net(&dvector![3.0, 4.0], &mix), 6.0);
    }

    #[test]
    fn penalty_config_validation() {
        assert!(PenaltyConfig::new(1.5, 1.0).is_err());
        assert!(PenaltyConfig::new(0.5, 0.0).is_err());
        assert!(PenaltyConfig::new(0.5, -1.0).is_err());
    }

    #[test]
    fn subgradient_examples() {
        let l1 = PenaltyConfig::new(1.0, 1.0).unwrap();
        let (g, deg) = penalty_subgradient(&dvector![2.0, 0.0], &l1);
        assert_eq!(g, dvector![1.0, 0.0]);
        assert!(!deg);
        let l2 = PenaltyConfig::new(0.0, 1.0).unwrap();
        let (g, _) = penalty_subgradient(&dvector![3.0, 4.0], &l2);
        assert!((g - dvector![0.6, 0.8]).norm() < 1e-15);
        let (g, deg) = penalty_subgradient(&DVector::zeros(3), &l2);
        assert_eq!(g, DVector::zeros(3));
        assert!(deg);
    }

    #[test]
    fn subgradient_matches_central_differences() {
        let cfg = PenaltyConfig::new(0.5, 1.0).unwrap();
        let u = dvector![0.3, -0.7];
        let (g, _) = penalty_subgradient(&u, &cfg);
        let hstep = 1e-6;
        for i in 0..2 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += hstep;
            dn[i] -= hstep;
            let fd = (elastic_net(&up, &cfg) - elastic_net(&dn, &cfg)) / (2.0 * hstep);
            assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-12), "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn constraints_feasible_point() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        let h = prob.constraints(&DirectionPair::new(e(10, 0), e(10, 0))).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h[0], 0.0);
        assert_eq!(h[1], 0.0);
        assert!(h[2] < 0.0 && h[3] < 0.0);
    }

    #[test]
    fn constraints_at_origin() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        let h = prob
            .constraints(&DirectionPair::new(DVector::zeros(10), DVector::zeros(10)))
            .unwrap();
        assert_eq!(h, dvector![-1.0, -1.0, -2.0, -2.0]);
    }

    #[test]
    fn constraints_orthogonality_rows() {
        let cov = setting1();
        let prob =
            MaxAssocProblem::new(&cov, vec![e(10, 0)], vec![e(10, 0)], loose(), loose()).unwrap();
        let h = prob.constraints(&DirectionPair::new(e(10, 1), e(10, 1))).unwrap();
        assert_eq!(h.len(), 6);
        assert_eq!(h[2], 0.0);
        assert_eq!(h[3], 0.0);
        assert!(!prob.is_inequality(2) && !prob.is_inequality(3));
        assert!(prob.is_inequality(0) && prob.is_inequality(5));
    }

    #[test]
    fn previous_directions_must_be_unit_variance() {
        let cov = setting1();
        let half = e(10, 0) * 0.5;
        assert!(MaxAssocProblem::new(&cov, vec![half], vec![e(10, 0)], loose(), loose()).is_err());
    }

    #[test]
    fn augmented_lagrangian_reduces_to_objective() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        let pair = DirectionPair::new(e(10, 0), e(10, 0));
        let zero = MultiplierState {
            lambda: DVector::zeros(4),
            c: 10.0,
        };
        let v = prob.augmented_lagrangian(&pair, &zero).unwrap();
        assert!((v + 0.9).abs() < 1e-15);

        let any = DirectionPair::new(DVector::from_element(10, 0.7), DVector::from_element(10, -0.4));
        let none = MultiplierState {
            lambda: DVector::zeros(4),
            c: 0.0,
        };
        let v = prob.augmented_lagrangian(&any, &none).unwrap();
        assert!((v + prob.objective(&any).unwrap()).abs() < 1e-15);
        let g = prob.al_subgradient(&any, &none).unwrap();
        assert!((g.a + &cov.cxy * &any.b).norm() < 1e-15);
        assert!((g.b + cov.cxy.transpose() * &any.a).norm() < 1e-15);
    }

    #[test]
    fn augmented_lagrangian_equality_row_by_hand() {
        let cov = setting1();
        let prob =
            MaxAssocProblem::new(&cov, vec![e(10, 0)], vec![e(10, 0)], loose(), loose()).unwrap();
        // r = a'Cxx a_1 = 0.1 on the orth_a row, other rows strictly feasible
        let mut a = e(10, 1) * 0.5;
        a[0] = 0.1;
        let b = e(10, 1) * 0.5;
        let pair = DirectionPair::new(a, b);
        let h = prob.constraints(&pair).unwrap();
        assert!((h[2] - 0.1).abs() < 1e-15 && h[3] == 0.0);
        assert!(h[0] < 0.0 && h[1] < 0.0 && h[4] < 0.0 && h[5] < 0.0);
        let mut lambda = DVector::zeros(6);
        lambda[2] = 0.5;
        let mult = MultiplierState { lambda, c: 10.0 };
        let v = prob.augmented_lagrangian(&pair, &mult).unwrap();
        let f = prob.objective(&pair).unwrap();
        assert!((v - (-f + 0.05 + 0.05)).abs() < 1e-14, "{v}");
    }

    #[test]
    fn inactive_inequality_rows_contribute_nothing() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        let pair = DirectionPair::new(e(10, 0) * 0.5, e(10, 0) * 0.5);
        let mult = MultiplierState {
            lambda: DVector::zeros(4),
            c: 100.0,
        };
        let v = prob.augmented_lagrangian(&pair, &mult).unwrap();
        assert!((v + 0.9 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn equality_mode_uses_all_rows() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose())
            .unwrap()
            .with_mode(ConstraintMode::Equality);
        let pair = DirectionPair::new(e(10, 0) * 0.5, e(10, 0) * 0.5);
        let mult = MultiplierState {
            lambda: DVector::zeros(4),
            c: 2.0,
        };
        let h = prob.constraints(&pair).unwrap();
        let v = prob.augmented_lagrangian(&pair, &mult).unwrap();
        assert!((v - (-0.225 + h.norm_squared())).abs() < 1e-14);
    }

    #[test]
    fn multiplier_wrong_length() {
        let cov = setting1();
        let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
        let mult = MultiplierState {
            lambda: DVector::zeros(3),
            c: 1.0,
        };
        let pair = DirectionPair::new(e(10, 0), e(10, 0));
        assert!(prob.augmented_lagrangian(&pair, &mult).is_err());
    }

    #[test]
    fn feasible_set_contains_first_canonical_pair() {
        // Cxx-normalized first canonical vector with c_a ≥ ‖a‖₁ satisfies all rows
        let cov = setting1();
        let a = e(10, 0);
        let bound = a.lp_norm(1);
        let pen = PenaltyConfig::new(1.0, bound).unwrap();
        let prob = MaxAssocProblem::first(&cov, pen, pen).unwrap();
        let h = prob.constraints(&DirectionPair::new(a.clone(), a)).unwrap();
        assert!(h.iter().all(|&v| v <= 0.0), "{h}");
    }

    proptest! {
        #[test]
        fn objective_is_bilinear(
            a in prop::collection::vec(-2.0f64..2.0, 10),
            b in prop::collection::vec(-2.0f64..2.0, 10),
        ) {
            let cov = setting1();
            let prob = MaxAssocProblem::first(&cov, loose(), loose()).unwrap();
            let a = DVector::from_vec(a);
            let b = DVector::from_vec(b);
            let f1 = prob.objective(&DirectionPair::new(a.clone(), b.clone())).unwrap();
            let f2 = prob.objective(&DirectionPair::new(a * 2.0, b)).unwrap();
            prop_assert_eq!(f2, 2.0 * f1);
        }

        #[test]
        fn elastic_net_is_convex(
            u in prop::collection::vec(-3.0f64..3.0, 5),
            v in prop::collection::vec(-3.0f64..3.0, 5),
            t in 0.0f64..1.0,
            alpha in 0.0f64..1.0,
        ) {
            let cfg = PenaltyConfig::new(alpha, 1.0).unwrap();
            let u = DVector::from_vec(u);
            let v = DVector::from_vec(v);
            let mid = &u * t + &v * (1.0 - t);
            let lhs = elastic_net(&mid, &cfg);
            let rhs = t * elastic_net(&u, &cfg) + (1.0 - t) * elastic_net(&v, &cfg);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn subgradient_inequality(
            u in prop::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0], 5),
            z in prop::collection::vec(-3.0f64..3.0, 5),
            alpha in 0.0f64..1.0,
        ) {
            let cfg = PenaltyConfig::new(alpha, 1.0).unwrap();
            let u = DVector::from_vec(u);
            let z = DVector::from_vec(z);
            let (g, _) = penalty_subgradient(&u, &cfg);
            prop_assert!(g.iter().all(|v| v.abs() <= 1.0 + 1e-12));
            let lhs = elastic_net(&z, &cfg);
            let rhs = elastic_net(&u, &cfg) + g.dot(&(&z - &u));
            prop_assert!(lhs >= rhs - 1e-12);
        }
    }
}
