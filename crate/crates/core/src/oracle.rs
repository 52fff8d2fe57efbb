//! Penalty-free reference solutions of the maximum-association problem.
//!
//! With `T = Σxx^{-1/2} Σxy Σyy^{-1/2}`, the associations are the singular
//! values of `T`; they are obtained from the symmetric eigenproblem of
//! `T Tᵀ = Σxx^{-1/2} Σxy Σyy^{-1} Σyx Σxx^{-1/2}` and the directions are
//! mapped back through the inverse square roots.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::covariance::{pearson_cov, JointCovariance};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{argmax_abs, inv_sqrt_spd, sym_eigen_desc};

/// Relative eigenvalue level below which a block counts as singular.
const SINGULAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TrueSolution {
    pub rhos: Vec<f64>,
    pub a_vectors: Vec<DVector<f64>>,
    pub b_vectors: Vec<DVector<f64>>,
}

impl TrueSolution {
    pub fn orders(&self) -> usize {
        self.rhos.len()
    }
}

fn whitening(block: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    inv_sqrt_spd(block, SINGULAR_FLOOR).map_err(|min_eigenvalue| Error::Singular {
        block: name,
        min_eigenvalue,
    })
}

fn lexicographic_desc(u: &DVector<f64>, v: &DVector<f64>) -> Ordering {
    for (x, y) in u.iter().zip(v.iter()) {
        if (x - y).abs() > 1e-12 {
            return y.total_cmp(x);
        }
    }
    Ordering::Equal
}

/// Associations of the a-side and b-side eigenproblems, for cross-checking.
pub fn side_eigenvalues(sigma: &JointCovariance) -> Result<(Vec<f64>, Vec<f64>)> {
    let wx = whitening(&sigma.cxx, "xx")?;
    let wy = whitening(&sigma.cyy, "yy")?;
    let t = &wx * &sigma.cxy * &wy;
    let (ea, _) = sym_eigen_desc(&(&t * t.transpose()));
    let (eb, _) = sym_eigen_desc(&(t.transpose() * &t));
    Ok((ea.iter().copied().collect(), eb.iter().copied().collect()))
}

/// Exact directions and associations of orders `1..=orders`.
pub fn true_directions(sigma: &JointCovariance, orders: usize) -> Result<TrueSolution> {
    let (p, q) = (sigma.p(), sigma.q());
    if orders == 0 || orders > p.min(q) {
        return Err(Error::Dimension(format!(
            "orders must lie in 1..={}, got {orders}",
            p.min(q)
        )));
    }
    let wx = whitening(&sigma.cxx, "xx")?;
    let wy = whitening(&sigma.cyy, "yy")?;
    let t = &wx * &sigma.cxy * &wy;
    let (vals_a, vecs_a) = sym_eigen_desc(&(&t * t.transpose()));
    let (_, vecs_b) = sym_eigen_desc(&(t.transpose() * &t));
    let rho_tol = 1e-8 * vals_a[0].max(0.0).sqrt();

    let mut items: Vec<(f64, DVector<f64>, DVector<f64>)> = (0..orders)
        .map(|i| {
            let rho = vals_a[i].max(0.0).sqrt().min(1.0);
            let u = vecs_a.column(i).into_owned();
            let mut a = &wx * &u;
            let mut b = if rho > rho_tol && rho > 0.0 {
                &wy * (t.transpose() * &u) / rho
            } else {
                &wy * vecs_b.column(i)
            };
            if a[argmax_abs(&a)] < 0.0 {
                a = -a;
            }
            let assoc = a.dot(&(&sigma.cxy * &b));
            if assoc < 0.0 || (assoc == 0.0 && b[argmax_abs(&b)] < 0.0) {
                b = -b;
            }
            (rho, a, b)
        })
        .collect();

    items.sort_by(|x, y| {
        if (x.0 - y.0).abs() <= 1e-10 * x.0.max(y.0).max(1e-300) {
            lexicographic_desc(&x.1, &y.1)
        } else {
            y.0.total_cmp(&x.0)
        }
    });

    Ok(TrueSolution {
        rhos: items.iter().map(|x| x.0).collect(),
        a_vectors: items.iter().map(|x| x.1.clone()).collect(),
        b_vectors: items.iter().map(|x| x.2.clone()).collect(),
    })
}

/// Classical canonical correlation analysis: [`true_directions`] on the
/// sample covariance.
pub fn classical_cca(data_x: &DataMatrix, data_y: &DataMatrix, orders: usize) -> Result<TrueSolution> {
    let (n, p, q) = (data_x.nrows(), data_x.ncols(), data_y.ncols());
    if n <= p.max(q) {
        return Err(Error::IllPosed(format!(
            "{n} observations for {p} + {q} variables"
        )));
    }
    let full = pearson_cov(&data_x.hstack(data_y)?)?;
    let joint = JointCovariance::from_full(&full.matrix, p)?;
    true_directions(&joint, orders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;

    fn blocks(cxx: DMatrix<f64>, cyy: DMatrix<f64>, cxy: DMatrix<f64>) -> JointCovariance {
        JointCovariance::from_blocks(cxx, cyy, cxy).unwrap()
    }

    fn setting1() -> JointCovariance {
        let mut cxy = DMatrix::zeros(10, 10);
        cxy[(0, 0)] = 0.9;
        cxy[(1, 1)] = 0.7;
        blocks(DMatrix::identity(10, 10), DMatrix::identity(10, 10), cxy)
    }

    #[test]
    fn setting1_truth() {
        let sol = true_directions(&setting1(), 2).unwrap();
        assert!((sol.rhos[0] - 0.9).abs() < 1e-12);
        assert!((sol.rhos[1] - 0.7).abs() < 1e-12);
        assert!((&sol.a_vectors[0] - unit(10, 0)).norm() < 1e-12);
        assert!((&sol.a_vectors[1] - unit(10, 1)).norm() < 1e-12);
        assert!((&sol.b_vectors[1] - unit(10, 1)).norm() < 1e-12);
    }

    #[test]
    fn uncorrelated_blocks() {
        let cov = blocks(
            DMatrix::identity(3, 3),
            DMatrix::identity(2, 2) * 2.0,
            DMatrix::zeros(3, 2),
        );
        let sol = true_directions(&cov, 2).unwrap();
        assert!(sol.rhos.iter().all(|&r| r == 0.0));
        for b in &sol.b_vectors {
            assert!((b.dot(&(&cov.cyy * b)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_block_is_reported() {
        let mut cxx = DMatrix::identity(2, 2);
        cxx[(1, 1)] = 0.0;
        let cov = blocks(cxx, DMatrix::identity(2, 2), DMatrix::zeros(2, 2));
        match true_directions(&cov, 1) {
            Err(Error::Singular { block, .. }) => assert_eq!(block, "xx"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_many_orders() {
        assert!(true_directions(&setting1(), 11).is_err());
        assert!(true_directions(&setting1(), 0).is_err());
    }

    #[test]
    fn perfect_correlation_from_data() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (0.3 * t).cos()]
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let sol = classical_cca(&x, &x, 1).unwrap();
        assert!((sol.rhos[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classical_cca_ill_posed() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(classical_cca(&x, &x, 1), Err(Error::IllPosed(_))));
    }

    #[test]
    fn ties_are_ordered_deterministically() {
        let cxy = DMatrix::identity(2, 2) * 0.5;
        let cov = blocks(DMatrix::identity(2, 2), DMatrix::identity(2, 2), cxy);
        let sol = true_directions(&cov, 2).unwrap();
        assert_eq!(sol.rhos[0], sol.rhos[1]);
        assert_eq!(
            lexicographic_desc(&sol.a_vectors[0], &sol.a_vectors[1]),
            Ordering::Less
        );
    }
}
