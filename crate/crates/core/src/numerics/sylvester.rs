//! Sylvester equation `A X - X B = C` by vectorization.

use nalgebra::{DMatrix, DVector};

use super::matrix::RMatrix;
use crate::error::{Error, Result};
use crate::tol::TOL;

/// Smallest distance between an eigenvalue of `a` and one of `b`.
pub fn spectral_separation(a: &RMatrix, b: &RMatrix) -> f64 {
    let ea = a.complex_eigenvalues();
    let eb = b.complex_eigenvalues();
    let mut sep = f64::INFINITY;
    for x in ea.iter() {
        for y in eb.iter() {
            sep = sep.min((x - y).norm());
        }
    }
    sep
}

/// Solves `A X - X B = C` for square `A` (n x n), `B` (m x m), `C` (n x m).
///
/// Uses `vec(A X - X B) = (I (x) A - B^T (x) I) vec(X)` and a dense LU solve of
/// the resulting `nm x nm` system.
pub fn solve_sylvester(a: &RMatrix, b: &RMatrix, c: &RMatrix) -> Result<RMatrix> {
    let n = a.nrows();
    let m = b.nrows();
    if a.ncols() != n || b.ncols() != m || c.nrows() != n || c.ncols() != m {
        return Err(Error::InvalidArgument(
            "Sylvester operands have incompatible shapes".into(),
        ));
    }
    let separation = spectral_separation(a, b);
    if separation <= TOL.sylvester_gap * (a.norm() + b.norm()) {
        return Err(Error::CommonEigenvalue { separation });
    }

    let dim = n * m;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    // Column-major vec: X[(i, j)] sits at index j * n + i.
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for p in 0..n {
                k[(row, j * n + p)] += a[(i, p)];
            }
            for q in 0..m {
                k[(row, q * n + i)] -= b[(q, j)];
            }
        }
    }
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::CommonEigenvalue { separation })?;
    let x = RMatrix::from_column_slice(n, m, sol.as_slice());

    let residual = (a * &x - &x * b - c).norm();
    let bound = TOL.sylvester_residual * c.norm().max(f64::MIN_POSITIVE);
    if residual > bound {
        return Err(Error::Numerical(format!(
            "Sylvester residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_case() {
        let x = solve_sylvester(
            &RMatrix::from_element(1, 1, 2.0),
            &RMatrix::from_element(1, 1, -1.0),
            &RMatrix::from_element(1, 1, 3.0),
        )
        .unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_constructed_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // Upper-triangular-plus-shift keeps the spectra apart: A has
            // eigenvalues in [1, 2], B in [-2, -1].
            let mut a = RMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.3..0.3));
            let mut b = RMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.3..0.3));
            for i in 0..3 {
                a[(i, i)] += 1.5;
                b[(i, i)] -= 1.5;
            }
            let x0 = RMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let c = &a * &x0 - &x0 * &b;
            let x = solve_sylvester(&a, &b, &c).unwrap();
            assert!((x - x0).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_common_eigenvalue() {
        let a = RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let b = RMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -3.0]);
        let c = RMatrix::identity(2, 2);
        assert!(matches!(
            solve_sylvester(&a, &b, &c),
            Err(Error::CommonEigenvalue { .. })
        ));
    }
}
