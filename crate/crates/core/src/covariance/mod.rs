//! Classical and robust estimates of the joint covariance of `(x, y)`.

mod nearpd;
mod ogk;
mod rank;
mod scale;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use nearpd::{nearest_pd, nearest_pd_with, NearPd, NearPdMode, NearPdOptions};
pub use ogk::{ogk, OgkOptions, OgkResult};
pub use rank::{
    average_ranks, kendall_tau_b, kendall_transform, rank_correlation, spearman_rho,
    spearman_transform, RankCorrelation, RankKind,
};
pub use scale::{mad, raw_mad, tau_scale, LocScale, TauConstants, MAD_CONSISTENCY};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue, symmetrized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorTag {
    Pearson,
    Spearman,
    Kendall,
    Ogk,
    /// Produced by a user-supplied [`CovarianceEstimator`].
    Custom,
}

impl EstimatorTag {
    pub const BUILTIN: [EstimatorTag; 4] = [
        EstimatorTag::Pearson,
        EstimatorTag::Spearman,
        EstimatorTag::Kendall,
        EstimatorTag::Ogk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorTag::Pearson => "pearson",
            EstimatorTag::Spearman => "spearman",
            EstimatorTag::Kendall => "kendall",
            EstimatorTag::Ogk => "ogk",
            EstimatorTag::Custom => "custom",
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(EstimatorTag::Pearson),
            "spearman" => Ok(EstimatorTag::Spearman),
            "kendall" => Ok(EstimatorTag::Kendall),
            "ogk" => Ok(EstimatorTag::Ogk),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?} (expected pearson, spearman, kendall or ogk)"
            ))),
        }
    }
}

/// A full covariance estimate with diagnostics.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub estimator: EstimatorTag,
    pub pd_repaired: bool,
    pub min_eigenvalue: f64,
    /// Columns with zero spread, reported by the rank estimators.
    pub degenerate_columns: Vec<usize>,
}

impl CovarianceEstimate {
    fn finish(matrix: DMatrix<f64>, estimator: EstimatorTag, degenerate: Vec<usize>) -> Self {
        let matrix = symmetrized(&matrix);
        let min_eigenvalue = min_eigenvalue(&matrix);
        Self {
            matrix,
            estimator,
            pd_repaired: false,
            min_eigenvalue,
            degenerate_columns: degenerate,
        }
    }

    /// Applies [`nearest_pd`] in covariance mode.
    pub fn repaired(mut self) -> Result<Self> {
        let opts = NearPdOptions {
            mode: NearPdMode::Covariance,
            ..Default::default()
        };
        let out = nearest_pd_with(&self.matrix, &opts)?;
        self.pd_repaired = true;
        self.matrix = out.matrix;
        self.min_eigenvalue = min_eigenvalue(&self.matrix);
        Ok(self)
    }
}

/// The blocks `Cxx`, `Cyy`, `Cxy` of a joint `(p+q)×(p+q)` covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    pub cxx: DMatrix<f64>,
    pub cyy: DMatrix<f64>,
    pub cxy: DMatrix<f64>,
}

impl JointCovariance {
    /// Partitions a full symmetric matrix after its first `p` rows/columns.
    pub fn from_full(full: &DMatrix<f64>, p: usize) -> Result<Self> {
        if !full.is_square() {
            return Err(Error::Dimension("joint covariance must be square".into()));
        }
        let d = full.nrows();
        if p == 0 || p >= d {
            return Err(Error::Dimension(format!(
                "cannot split a {d}x{d} covariance after {p} rows"
            )));
        }
        if !is_symmetric(full, 1e-12) {
            return Err(Error::Domain("joint covariance is not symmetric".into()));
        }
        let full = symmetrized(full);
        let q = d - p;
        Ok(Self {
            cxx: full.view((0, 0), (p, p)).into_owned(),
            cyy: full.view((p, p), (q, q)).into_owned(),
            cxy: full.view((0, p), (p, q)).into_owned(),
        })
    }

    pub fn from_blocks(cxx: DMatrix<f64>, cyy: DMatrix<f64>, cxy: DMatrix<f64>) -> Result<Self> {
        let (p, q) = (cxx.nrows(), cyy.nrows());
        if !cxx.is_square() || !cyy.is_square() || cxy.shape() != (p, q) {
            return Err(Error::Dimension(format!(
                "inconsistent block shapes: cxx {:?}, cyy {:?}, cxy {:?}",
                cxx.shape(),
                cyy.shape(),
                cxy.shape()
            )));
        }
        if !is_symmetric(&cxx, 1e-12) || !is_symmetric(&cyy, 1e-12) {
            return Err(Error::Domain("diagonal blocks must be symmetric".into()));
        }
        Ok(Self {
            cxx: symmetrized(&cxx),
            cyy: symmetrized(&cyy),
            cxy,
        })
    }

    pub fn p(&self) -> usize {
        self.cxx.nrows()
    }

    pub fn q(&self) -> usize {
        self.cyy.nrows()
    }

    /// Reassembles the full joint matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let (p, q) = (self.p(), self.q());
        let mut m = DMatrix::zeros(p + q, p + q);
        m.view_mut((0, 0), (p, p)).copy_from(&self.cxx);
        m.view_mut((p, p), (q, q)).copy_from(&self.cyy);
        m.view_mut((0, p), (p, q)).copy_from(&self.cxy);
        m.view_mut((p, 0), (q, p)).copy_from(&self.cxy.transpose());
        m
    }
}

/// Estimator plug-in point; the built-in estimators implement it through
/// [`EstimatorTag`], other scatter estimators can be supplied by callers.
pub trait CovarianceEstimator {
    fn estimate(&self, data: &DataMatrix) -> Result<CovarianceEstimate>;
}

impl CovarianceEstimator for EstimatorTag {
    fn estimate(&self, data: &DataMatrix) -> Result<CovarianceEstimate> {
        match self {
            EstimatorTag::Pearson => pearson_cov(data),
            EstimatorTag::Spearman => rank_cov(data, RankKind::Spearman, false),
            EstimatorTag::Kendall => rank_cov(data, RankKind::Kendall, false),
            EstimatorTag::Ogk => ogk_cov(data),
            EstimatorTag::Custom => Err(Error::Config(
                "the custom tag has no built-in estimator".into(),
            )),
        }
    }
}

fn require_rows(data: &DataMatrix, what: &str) -> Result<()> {
    if data.nrows() < 2 {
        return Err(Error::Dimension(format!(
            "{what} needs at least 2 rows, got {}",
            data.nrows()
        )));
    }
    Ok(())
}

/// Unbiased sample covariance (divisor `n − 1`).
pub fn pearson_cov(data: &DataMatrix) -> Result<CovarianceEstimate> {
    require_rows(data, "sample covariance")?;
    let x = data.values();
    let n = x.nrows();
    let means = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok(CovarianceEstimate::finish(cov, EstimatorTag::Pearson, Vec::new()))
}

/// `diag(scales) · corr · diag(scales)`.
pub fn corr_to_cov(corr: &DMatrix<f64>, scales: &[f64]) -> Result<DMatrix<f64>> {
    let d = corr.nrows();
    if !corr.is_square() || scales.len() != d {
        return Err(Error::Dimension(format!(
            "{}x{} correlation with {} scales",
            corr.nrows(),
            corr.ncols(),
            scales.len()
        )));
    }
    if let Some(j) = scales.iter().position(|&s| !(s >= 0.0)) {
        return Err(Error::Domain(format!(
            "scale {j} is negative or NaN ({})",
            scales[j]
        )));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| scales[i] * corr[(i, j)] * scales[j]))
}

/// Rank correlation scaled to a covariance with per-column MAD. When
/// `repair_corr` is set, the correlation matrix is repaired with
/// [`nearest_pd`] before scaling.
pub fn rank_cov(data: &DataMatrix, kind: RankKind, repair_corr: bool) -> Result<CovarianceEstimate> {
    let rc = rank_correlation(data, kind)?;
    let corr = if repair_corr {
        let opts = NearPdOptions {
            mode: NearPdMode::Correlation,
            ..Default::default()
        };
        nearest_pd_with(&rc.matrix, &opts)?.matrix
    } else {
        rc.matrix
    };
    let scales = (0..data.ncols())
        .map(|j| mad(&data.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let tag = match kind {
        RankKind::Spearman => EstimatorTag::Spearman,
        RankKind::Kendall => EstimatorTag::Kendall,
    };
    let mut est = CovarianceEstimate::finish(corr_to_cov(&corr, &scales)?, tag, rc.degenerate_columns);
    est.pd_repaired = repair_corr;
    Ok(est)
}

/// Raw OGK with τ-scales and two orthogonalization passes.
pub fn ogk_cov(data: &DataMatrix) -> Result<CovarianceEstimate> {
    ogk_cov_with(data, &OgkOptions::default())
}

pub fn ogk_cov_with(data: &DataMatrix, opts: &OgkOptions) -> Result<CovarianceEstimate> {
    require_rows(data, "OGK")?;
    let res = ogk(data, opts)?;
    Ok(CovarianceEstimate::finish(
        ogk::psd_corrected(&res.covariance),
        EstimatorTag::Ogk,
        Vec::new(),
    ))
}

/// Estimates the covariance of the stacked columns `[x | y]`, optionally
/// repairing it to be positive definite.
pub fn estimate_stacked(
    data: &DataMatrix,
    estimator: EstimatorTag,
    repair_pd: bool,
) -> Result<CovarianceEstimate> {
    match estimator {
        EstimatorTag::Spearman => rank_cov(data, RankKind::Spearman, repair_pd),
        EstimatorTag::Kendall => rank_cov(data, RankKind::Kendall, repair_pd),
        other => {
            let est = other.estimate(data)?;
            if repair_pd {
                est.repaired()
            } else {
                Ok(est)
            }
        }
    }
}

/// Joint covariance of `x` and `y` partitioned into blocks.
pub fn estimate_joint(
    data_x: &DataMatrix,
    data_y: &DataMatrix,
    estimator: EstimatorTag,
    repair_pd: bool,
) -> Result<JointCovariance> {
    let stacked = data_x.hstack(data_y)?;
    let est = estimate_stacked(&stacked, estimator, repair_pd)?;
    JointCovariance::from_full(&est.matrix, data_x.ncols())
}

/// Same as [`estimate_joint`] for a caller-provided estimator.
pub fn estimate_joint_with(
    data_x: &DataMatrix,
    data_y: &DataMatrix,
    estimator: &dyn CovarianceEstimator,
    repair_pd: bool,
) -> Result<JointCovariance> {
    let stacked = data_x.hstack(data_y)?;
    let mut est = estimator.estimate(&stacked)?;
    if repair_pd {
        est = est.repaired()?;
    }
    JointCovariance::from_full(&est.matrix, data_x.ncols())
}
