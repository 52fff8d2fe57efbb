//! Orthogonalized Gnanadesikan–Kettenring covariance.
//!
//! Pairwise covariances come from the polarization identity
//! `cov(x, y) = (σ(x + y)² − σ(x − y)²) / 4` with the τ-scale as σ. The
//! resulting matrix is generally not positive semidefinite, so its
//! eigenvectors are used to rotate the data, robust variances are taken along
//! the rotated axes, and the covariance is rebuilt from them. The rotation may
//! be repeated on the rotated data.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::scale::{tau_scale, TauConstants};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, sym_eigen_desc, symmetrized};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OgkOptions {
    /// Number of orthogonalization passes.
    pub iterations: usize,
    pub tau: TauConstants,
}

impl Default for OgkOptions {
    fn default() -> Self {
        Self {
            iterations: 2,
            tau: TauConstants::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OgkResult {
    pub covariance: DMatrix<f64>,
    pub location: DVector<f64>,
}

fn scale_of(col: &[f64], k: TauConstants) -> f64 {
    tau_scale(col, k).map(|ls| ls.scale).unwrap_or(0.0)
}

/// Gnanadesikan–Kettenring pairwise covariance of two standardized columns.
fn gk_pair(x: &[f64], y: &[f64], k: TauConstants) -> f64 {
    let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let sp = scale_of(&sum, k);
    let sm = scale_of(&diff, k);
    (sp * sp - sm * sm) / 4.0
}

/// Raw (unreweighted) OGK estimate of location and scatter.
pub fn ogk(data: &DataMatrix, opts: &OgkOptions) -> Result<OgkResult> {
    let n = data.nrows();
    let d = data.ncols();
    if n < 2 {
        return Err(Error::Dimension(format!("OGK needs at least 2 rows, got {n}")));
    }
    if opts.iterations == 0 {
        return Err(Error::Config("OGK needs at least one iteration".into()));
    }
    let k = opts.tau;
    // column-major working copy
    let mut z: Vec<Vec<f64>> = (0..d).map(|j| data.column(j)).collect();
    let mut transforms: Vec<DMatrix<f64>> = Vec::with_capacity(opts.iterations);

    for pass in 0..opts.iterations {
        let scales: Vec<f64> = z.par_iter().map(|c| scale_of(c, k)).collect();
        if let Some(j) = scales.iter().position(|&s| !(s > 0.0)) {
            // only the first pass refers to caller columns
            return Err(if pass == 0 {
                Error::DegenerateScale { column: j }
            } else {
                Error::Domain(format!(
                    "OGK pass {} produced a zero scale along rotated axis {j}",
                    pass + 1
                ))
            });
        }
        for (col, &s) in z.iter_mut().zip(&scales) {
            col.iter_mut().for_each(|v| *v /= s);
        }

        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .collect();
        let vals: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| gk_pair(&z[i], &z[j], k))
            .collect();
        let mut u = DMatrix::identity(d, d);
        for (&(i, j), &v) in pairs.iter().zip(&vals) {
            u[(i, j)] = v;
            u[(j, i)] = v;
        }

        let (_, e) = sym_eigen_desc(&u);
        // A = diag(scales) · E
        let a = DMatrix::from_fn(d, d, |i, j| scales[i] * e[(i, j)]);
        transforms.push(a);

        // z ← z · E
        let rotated: Vec<Vec<f64>> = (0..d)
            .into_par_iter()
            .map(|l| {
                (0..n)
                    .map(|r| (0..d).map(|m| z[m][r] * e[(m, l)]).sum())
                    .collect()
            })
            .collect();
        z = rotated;
    }

    let loc_scale: Vec<(f64, f64)> = z
        .par_iter()
        .map(|c| {
            tau_scale(c, k)
                .map(|ls| (ls.location, ls.scale))
                .unwrap_or((0.0, 0.0))
        })
        .collect();
    let mut cov = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        loc_scale.iter().map(|&(_, s)| s * s),
    ));
    let mut center = DVector::from_iterator(d, loc_scale.iter().map(|&(m, _)| m));
    for a in transforms.iter().rev() {
        cov = a * cov * a.transpose();
        center = a * center;
    }
    Ok(OgkResult {
        covariance: symmetrized(&cov),
        location: center,
    })
}

/// Clips eigenvalues below zero; the OGK reconstruction is positive
/// semidefinite up to rounding.
pub(crate) fn psd_corrected(m: &DMatrix<f64>) -> DMatrix<f64> {
    if min_eigenvalue(m) >= 0.0 {
        return m.clone();
    }
    let (vals, vecs) = sym_eigen_desc(m);
    crate::linalg::from_eigen(&vals.map(|v| v.max(0.0)), &vecs)
}
