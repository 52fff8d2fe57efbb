//! Nearest positive (semi)definite matrix in the Frobenius norm.
//!
//! Unit-diagonal inputs are treated as correlation matrices and repaired with
//! Higham's alternating projections (with Dykstra's correction) between the
//! PSD cone and the unit-diagonal affine set. Other inputs are projected onto
//! the PSD cone directly, which is exact in one step. In both cases the
//! spectrum is then floored at `eig_floor · λ_max` so the result is strictly
//! positive definite.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{from_eigen, is_symmetric, sym_eigen_desc, symmetrized};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearPdMode {
    /// Correlation mode when every diagonal entry is 1 within 1e-12.
    Auto,
    Correlation,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearPdOptions {
    pub mode: NearPdMode,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Relative eigenvalue floor applied after convergence.
    pub eig_floor: f64,
}

impl Default for NearPdOptions {
    fn default() -> Self {
        Self {
            mode: NearPdMode::Auto,
            max_iterations: 10_000,
            tolerance: 1e-10,
            eig_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NearPd {
    pub matrix: DMatrix<f64>,
    /// Number of alternating-projection sweeps (0 when nothing had to change).
    pub iterations: usize,
    pub changed: bool,
}

fn has_unit_diagonal(m: &DMatrix<f64>) -> bool {
    m.diagonal().iter().all(|&v| (v - 1.0).abs() <= 1e-12)
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_desc(m);
    from_eigen(&vals.map(|v| v.max(0.0)), &vecs)
}

fn floor_spectrum(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_desc(m);
    let top = vals[0].max(0.0);
    let floor = if top > 0.0 { rel * top } else { rel };
    from_eigen(&vals.map(|v| v.max(floor)), &vecs)
}

/// Rescales to unit diagonal, `D^{-1/2} M D^{-1/2}`.
fn to_unit_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = m.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    let n = m.nrows();
    symmetrized(&DMatrix::from_fn(n, n, |i, j| m[(i, j)] * d[i] * d[j]))
}

/// Nearest positive definite matrix with default options.
pub fn nearest_pd(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nearest_pd_with(matrix, &NearPdOptions::default()).map(|r| r.matrix)
}

pub fn nearest_pd_with(matrix: &DMatrix<f64>, opts: &NearPdOptions) -> Result<NearPd> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "nearest_pd needs a non-empty square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if !is_symmetric(matrix, 1e-10) {
        return Err(Error::Domain("nearest_pd input is not symmetric".into()));
    }
    let correlation = match opts.mode {
        NearPdMode::Auto => has_unit_diagonal(matrix),
        NearPdMode::Correlation => true,
        NearPdMode::Covariance => false,
    };
    let a = symmetrized(matrix);

    let (vals, _) = sym_eigen_desc(&a);
    let top = vals[0];
    let bottom = vals[vals.len() - 1];
    let diag_ok = !correlation || has_unit_diagonal(&a);
    // half the floor leaves room for the rounding of a previous repair
    if top > 0.0 && bottom >= 0.5 * opts.eig_floor * top && diag_ok {
        return Ok(NearPd {
            matrix: a,
            iterations: 0,
            changed: false,
        });
    }

    if !correlation {
        let x = floor_spectrum(&project_psd(&a), opts.eig_floor);
        return Ok(NearPd {
            matrix: x,
            iterations: 1,
            changed: true,
        });
    }

    let n = a.nrows();
    let mut y = a.clone();
    let mut ds = DMatrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let r = &y - &ds;
        let x = project_psd(&r);
        ds = &x - &r;
        let y_prev = y;
        y = x.clone();
        y.fill_diagonal(1.0);
        let scale = y.norm().max(1.0);
        residual = (&y - &y_prev).norm() / scale;
        let gap = (&y - &x).norm() / scale;
        if residual <= opts.tolerance && gap <= opts.tolerance.sqrt() {
            let repaired = to_unit_diagonal(&floor_spectrum(&x, opts.eig_floor));
            return Ok(NearPd {
                matrix: repaired,
                iterations: it,
                changed: true,
            });
        }
    }
    Err(Error::Convergence {
        what: "nearest_pd",
        iterations: opts.max_iterations,
        residual,
    })
}
