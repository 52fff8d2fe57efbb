//! Univariate robust location and scale.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::median_in_place;

/// Normal-consistency factor for the median absolute deviation, 1/Φ⁻¹(3/4).
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median absolute deviation scaled by [`MAD_CONSISTENCY`].
pub fn mad(column: &[f64]) -> Result<f64> {
    Ok(raw_mad(column)? * MAD_CONSISTENCY)
}

/// `median(|x − median(x)|)` without any consistency factor.
pub fn raw_mad(column: &[f64]) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::Dimension("MAD of an empty vector".into()));
    }
    let mut buf = column.to_vec();
    let med = median_in_place(&mut buf);
    for (b, &x) in buf.iter_mut().zip(column) {
        *b = (x - med).abs();
    }
    Ok(median_in_place(&mut buf))
}

/// Tuning constants of the τ-scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauConstants {
    /// Location weight cutoff, in MAD units.
    pub c1: f64,
    /// Truncation point of the squared standardized residuals.
    pub c2: f64,
}

impl Default for TauConstants {
    fn default() -> Self {
        Self { c1: 4.5, c2: 3.0 }
    }
}

/// Robust location and dispersion of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocScale {
    pub location: f64,
    pub scale: f64,
}

/// E[min(Z², b²)] for standard normal Z.
fn truncated_second_moment(b: f64) -> f64 {
    let n = Normal::standard();
    2.0 * ((1.0 - b * b) * n.cdf(b) - b * n.pdf(b) + b * b) - 1.0
}

/// One-step τ estimate of location and scale (Yohai–Zamar), normalized to
/// be consistent at the normal distribution.
///
/// Returns `scale == 0` when more than half the observations coincide.
pub fn tau_scale(x: &[f64], k: TauConstants) -> Result<LocScale> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Dimension("τ-scale of an empty vector".into()));
    }
    let mut buf = x.to_vec();
    let med = median_in_place(&mut buf);
    for (b, &v) in buf.iter_mut().zip(x) {
        *b = (v - med).abs();
    }
    let sigma0 = median_in_place(&mut buf);
    if sigma0 <= 0.0 {
        return Ok(LocScale {
            location: med,
            scale: 0.0,
        });
    }

    let location = if k.c1 > 0.0 {
        let (mut num, mut den) = (0.0, 0.0);
        for &v in x {
            let u = (v - med).abs() / (sigma0 * k.c1);
            let w = (1.0 - u * u).max(0.0).powi(2);
            num += v * w;
            den += w;
        }
        num / den
    } else {
        med
    };

    let cap = k.c2 * k.c2;
    let sum_rho: f64 = x
        .iter()
        .map(|&v| {
            let r = (v - location) / sigma0;
            (r * r).min(cap)
        })
        .sum();
    let q75 = Normal::standard().inverse_cdf(0.75);
    let expected = n as f64 * truncated_second_moment(k.c2 * q75);
    Ok(LocScale {
        location,
        scale: sigma0 * (sum_rho / expected).sqrt(),
    })
}
