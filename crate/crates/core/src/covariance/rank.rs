//! Spearman and Kendall correlation matrices, mapped to the Pearson scale.
//!
//! Under bivariate normality `ρ_S = (6/π)·asin(ρ/2)` and `τ = (2/π)·asin(ρ)`;
//! inverting these relations gives estimators that are consistent for `ρ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankKind {
    Spearman,
    Kendall,
}

/// Transformed rank-correlation matrix plus the indices of constant columns,
/// whose correlations with every other column are reported as 0.
#[derive(Debug, Clone)]
pub struct RankCorrelation {
    pub matrix: DMatrix<f64>,
    pub degenerate_columns: Vec<usize>,
}

/// `2·sin(π·r/6)`.
pub fn spearman_transform(r: f64) -> f64 {
    2.0 * (PI * r / 6.0).sin()
}

/// `sin(π·r/2)`.
pub fn kendall_transform(r: f64) -> f64 {
    (PI * r / 2.0).sin()
}

/// Ranks starting at 1, ties receive the average of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of two equal-length vectors; `None` when either has
/// zero variance.
fn pearson_r(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Raw Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Counts pairs `i < j` with `v[i] > v[j]` while sorting `v` ascending.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo) + merge_count(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Bit pattern with -0.0 folded onto 0.0.
fn bits(v: f64) -> u64 {
    (v + 0.0).to_bits()
}

/// Number of tied pairs implied by runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Kendall's τ_b in O(n log n) (Knight's merge-sort algorithm). `None` when
/// either variable is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let ties_x = tied_pairs(idx.iter().map(|&i| bits(x[i])));
    let ties_xy = tied_pairs(idx.iter().map(|&i| (bits(x[i]), bits(y[i]))));

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);
    let ties_y = tied_pairs(ys.iter().map(|&v| bits(v)));

    let dx = (n0 - ties_x) as f64;
    let dy = (n0 - ties_y) as f64;
    if dx <= 0.0 || dy <= 0.0 {
        return None;
    }
    let numer = n0 as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64
        - 2.0 * discordant as f64;
    Some((numer / (dx * dy).sqrt()).clamp(-1.0, 1.0))
}

/// Transformed pairwise rank-correlation matrix of all columns.
pub fn rank_correlation(data: &DataMatrix, kind: RankKind) -> Result<RankCorrelation> {
    let n = data.nrows();
    let d = data.ncols();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "rank correlation needs at least 2 rows, got {n}"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| data.column(j)).collect();
    // ranks are reused across all pairs for Spearman
    let prepared: Vec<Vec<f64>> = match kind {
        RankKind::Spearman => cols.iter().map(|c| average_ranks(c)).collect(),
        RankKind::Kendall => cols,
    };
    let degenerate_columns: Vec<usize> = (0..d)
        .filter(|&j| prepared[j].iter().all(|&v| v == prepared[j][0]))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| match kind {
            RankKind::Spearman => pearson_r(&prepared[i], &prepared[j])
                .map(spearman_transform)
                .unwrap_or(0.0),
            RankKind::Kendall => kendall_tau_b(&prepared[i], &prepared[j])
                .map(kendall_transform)
                .unwrap_or(0.0),
        })
        .collect();

    let mut m = DMatrix::identity(d, d);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    if !degenerate_columns.is_empty() {
        log::warn!(
            "constant columns {:?}: correlations set to 0",
            degenerate_columns
        );
    }
    Ok(RankCorrelation {
        matrix: m,
        degenerate_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// O(n²) τ_b straight from the definition.
    fn kendall_brute(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in (i + 1)..n {
                let sx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
                let sy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
                if sx == 0.0 && sy == 0.0 {
                    continue;
                }
                if sx == 0.0 {
                    tx += 1;
                } else if sy == 0.0 {
                    ty += 1;
                } else if sx == sy {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
        let dx = (conc + disc + ty) as f64;
        let dy = (conc + disc + tx) as f64;
        if dx == 0.0 || dy == 0.0 {
            return None;
        }
        Some((conc - disc) as f64 / (dx * dy).sqrt())
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn transforms_closed_form() {
        assert!((spearman_transform(1.0) - 1.0).abs() < 1e-15);
        assert!((kendall_transform(0.5) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(spearman_transform(0.0), 0.0);
        // inverse of the population relations under normality
        for rho in [-0.9f64, -0.3, 0.2, 0.6, 0.99] {
            let rs = (6.0 / PI) * (rho / 2.0).asin();
            let tau = (2.0 / PI) * f64::asin(rho);
            assert!((spearman_transform(rs) - rho).abs() < 1e-14);
            assert!((kendall_transform(tau) - rho).abs() < 1e-14);
        }
    }

    #[test]
    fn spearman_of_monotone_map_is_one() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 - 12.3) * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        let data = DataMatrix::from_rows(
            &x.iter().zip(&y).map(|(&a, &b)| vec![a, b]).collect::<Vec<_>>(),
        )
        .unwrap();
        let rc = rank_correlation(&data, RankKind::Spearman).unwrap();
        assert!((rc.matrix[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_small_known() {
        // one discordant pair out of three
        let t = kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_column_gives_zero_and_is_flagged() {
        let data =
            DataMatrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        for kind in [RankKind::Spearman, RankKind::Kendall] {
            let rc = rank_correlation(&data, kind).unwrap();
            assert_eq!(rc.matrix[(0, 1)], 0.0);
            assert_eq!(rc.matrix[(1, 1)], 1.0);
            assert_eq!(rc.degenerate_columns, vec![1]);
        }
    }

    #[test]
    fn too_few_rows() {
        let data = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(rank_correlation(&data, RankKind::Kendall).is_err());
    }

    proptest! {
        #[test]
        fn kendall_matches_brute_force(
            pairs in prop::collection::vec((0i32..6, 0i32..6), 2..40)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let fast = kendall_tau_b(&x, &y);
            let slow = kendall_brute(&x, &y);
            match (fast, slow) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn rank_correlation_invariant_under_exp(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 5..30)
        ) {
            let data = DataMatrix::from_rows(&rows).unwrap();
            let mapped: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r[0].exp(), r[1], r[2]])
                .collect();
            let mapped = DataMatrix::from_rows(&mapped).unwrap();
            for kind in [RankKind::Spearman, RankKind::Kendall] {
                let a = rank_correlation(&data, kind).unwrap().matrix;
                let b = rank_correlation(&mapped, kind).unwrap().matrix;
                prop_assert!((a - b).amax() < 1e-12);
            }
        }

        #[test]
        fn rank_matrix_is_valid(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 2..25)
        ) {
            let data = DataMatrix::from_rows(&rows).unwrap();
            for kind in [RankKind::Spearman, RankKind::Kendall] {
                let m = rank_correlation(&data, kind).unwrap().matrix;
                for i in 0..4 {
                    prop_assert_eq!(m[(i, i)], 1.0);
                    for j in 0..4 {
                        prop_assert_eq!(m[(i, j)], m[(j, i)]);
                        prop_assert!(m[(i, j)].abs() <= 1.0);
                    }
                }
            }
        }
    }
}
