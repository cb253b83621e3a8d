//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here operates on tiny systems (dimension 2n+1 with n = 1 for
//! the built-in charts), so plain LU/SVD factorizations are fine.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solve `A x = b` in the least-squares sense via normal equations with a
/// Cholesky factorization, falling back to SVD when the normal matrix is
/// ill-conditioned. Returns the solution together with `|A x - b|`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<(DVector<f64>, f64)> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let x = match ata.clone().cholesky() {
        Some(chol) => chol.solve(&atb),
        None => {
            let svd = a.clone().svd(true, true);
            svd.solve(b, 1e-12)
                .map_err(|_| Error::Degeneracy {
                    context: context.to_string(),
                    residual: f64::INFINITY,
                })?
        }
    };
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Solve a small square system `A x = b` by LU with full pivoting.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    a.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or_else(|| Error::Degeneracy {
            context: context.to_string(),
            residual: f64::INFINITY,
        })
}

/// Orthonormal basis (w.r.t. the metric `g`) of the annihilator of the
/// covector `alpha`, by Gram-Schmidt over the coordinate directions in
/// deterministic index order.
///
/// Returns `dim - 1` vectors spanning `ker alpha`.
pub fn kernel_basis(alpha: &DVector<f64>, g: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let dim = alpha.len();
    // Project coordinate directions onto ker alpha using the g-dual of alpha.
    // v_dual solves g v = alpha, so alpha(x) = g(v_dual, x).
    let v_dual = g
        .clone()
        .cholesky()
        .expect("chart metric must be positive definite")
        .solve(&alpha.clone());
    let alpha_norm2 = alpha.dot(&v_dual);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
    for i in 0..dim {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        // Remove the alpha-component.
        let coeff = alpha.dot(&v) / alpha_norm2;
        v -= &v_dual * coeff;
        // Gram-Schmidt against the vectors already accepted.
        for u in &basis {
            let num = (g * &v).dot(u);
            v -= u * num;
        }
        let norm = (g * &v).dot(&v).sqrt();
        if norm > 1e-10 {
            basis.push(v / norm);
        }
        if basis.len() == dim - 1 {
            break;
        }
    }
    basis
}

/// Pfaffian of a (2m x 2m) antisymmetric matrix by recursive expansion
/// along the first row. Sizes here are tiny (m <= 3).
pub fn pfaffian(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    if n % 2 != 0 {
        return 0.0;
    }
    if n == 2 {
        return m[(0, 1)];
    }
    let mut acc = 0.0;
    for j in 1..n {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let keep: Vec<usize> = (1..n).filter(|&k| k != j).collect();
        let mut sub = DMatrix::zeros(n - 2, n - 2);
        for (r, &kr) in keep.iter().enumerate() {
            for (c, &kc) in keep.iter().enumerate() {
                sub[(r, c)] = m[(kr, kc)];
            }
        }
        acc += sign * m[(0, j)] * pfaffian(&sub);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_exact_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, res) = least_squares(&a, &b, "test").unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn kernel_basis_annihilates_alpha() {
        let alpha = DVector::from_vec(vec![0.0, 0.125, 1.0]);
        let g = DMatrix::identity(3, 3);
        let basis = kernel_basis(&alpha, &g);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!(alpha.dot(v).abs() < 1e-12);
        }
        // Orthonormality.
        assert!((basis[0].dot(&basis[0]) - 1.0).abs() < 1e-12);
        assert!(basis[0].dot(&basis[1]).abs() < 1e-12);
    }

    #[test]
    fn pfaffian_2x2_and_4x4() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        assert!((pfaffian(&m) - 3.0).abs() < 1e-15);
        // Pf of the standard symplectic block diag(J1(a), J1(b)) is a*b.
        let mut m4 = DMatrix::zeros(4, 4);
        m4[(0, 1)] = 2.0;
        m4[(1, 0)] = -2.0;
        m4[(2, 3)] = 5.0;
        m4[(3, 2)] = -5.0;
        assert!((pfaffian(&m4) - 10.0).abs() < 1e-12);
        // Pf^2 = det.
        let mut m4b = DMatrix::zeros(4, 4);
        let entries = [(0usize, 1usize, 1.3), (0, 2, -0.4), (0, 3, 2.2), (1, 2, 0.7), (1, 3, -1.1), (2, 3, 0.5)];
        for &(i, j, v) in &entries {
            m4b[(i, j)] = v;
            m4b[(j, i)] = -v;
        }
        let pf = pfaffian(&m4b);
        assert!((pf * pf - m4b.determinant()).abs() < 1e-10);
    }
}
