//! Cyclic Jacobi diagonalization for the small real-symmetric Hamiltonian
//! blocks (at most 3×3 here, but any size works).

use nalgebra::DMatrix;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` is the normalized eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Diagonalizes `a` with cyclic Jacobi rotations.
///
/// Returns `None` when the off-diagonal norm has not dropped below
/// `rel_tol` times the Frobenius norm after `max_sweeps` sweeps.
pub fn jacobi_eigen(a: &DMatrix<f64>, rel_tol: f64, max_sweeps: usize) -> Option<SymmetricEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = m.norm();

    let off = |m: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= rel_tol * norm;
    let mut sweep = 0;
    while !converged && sweep < max_sweeps {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
        converged = off(&m) <= rel_tol * norm;
    }
    if !converged {
        return None;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Some(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_matrix_is_sorted() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        let e = jacobi_eigen(&a, 1e-15, 50).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        assert_eq!(e.vectors[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn known_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = jacobi_eigen(&a, 1e-15, 50).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_sweeps_fails_on_coupled_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(jacobi_eigen(&a, 1e-15, 0).is_none());
    }

    proptest! {
        #[test]
        fn reconstructs_input(entries in proptest::collection::vec(-10.0f64..10.0, 6)) {
            let a = DMatrix::from_row_slice(3, 3, &[
                entries[0], entries[1], entries[2],
                entries[1], entries[3], entries[4],
                entries[2], entries[4], entries[5],
            ]);
            let e = jacobi_eigen(&a, 1e-15, 100).unwrap();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
            let back = &e.vectors * d * e.vectors.transpose();
            prop_assert!((back - &a).norm() <= 1e-12 * (1.0 + a.norm()));
            let trace: f64 = e.values.iter().sum();
            prop_assert!((trace - a.trace()).abs() <= 1e-12 * (1.0 + a.norm()));
        }
    }
}
