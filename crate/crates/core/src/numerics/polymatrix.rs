//! Determinants of small square matrices with polynomial entries.

use num_complex::Complex64;

use super::poly::Polynomial;

/// Largest dimension expanded exactly over column subsets; larger matrices
/// are interpolated on the unit circle.
const SUBSET_EXPANSION_MAX: usize = 10;

/// Determinant of a square polynomial matrix given row by row.
pub fn poly_det(rows: &[Vec<Polynomial>]) -> Polynomial {
    let n = rows.len();
    assert!(rows.iter().all(|r| r.len() == n), "polynomial matrix must be square");
    if n == 0 {
        return Polynomial::one();
    }
    if n <= SUBSET_EXPANSION_MAX {
        subset_expansion(rows)
    } else {
        interpolate(rows)
    }
}

/// Laplace expansion organised as a dynamic program over used columns:
/// `acc[S]` is the signed sum over bijections from the first |S| rows onto S.
fn subset_expansion(rows: &[Vec<Polynomial>]) -> Polynomial {
    let n = rows.len();
    let mut acc: Vec<Option<Polynomial>> = vec![None; 1 << n];
    acc[0] = Some(Polynomial::one());
    for mask in 0usize..(1 << n) {
        let Some(partial) = acc[mask].take() else { continue };
        let row = mask.count_ones() as usize;
        if row == n {
            acc[mask] = Some(partial);
            continue;
        }
        for col in 0..n {
            if mask & (1 << col) != 0 || rows[row][col].is_zero() {
                continue;
            }
            // Inversions added by placing `col` after the columns already used.
            let above = (mask >> (col + 1)).count_ones();
            let term = &partial * &rows[row][col];
            let term = if above % 2 == 1 { -&term } else { term };
            let next = mask | (1 << col);
            acc[next] = Some(match acc[next].take() {
                Some(p) => &p + &term,
                None => term,
            });
        }
    }
    acc[(1 << n) - 1].take().unwrap_or_else(Polynomial::zero)
}

/// Evaluates the determinant at roots of unity and recovers the coefficients
/// with an inverse discrete Fourier transform.
fn interpolate(rows: &[Vec<Polynomial>]) -> Polynomial {
    let n = rows.len();
    let degree: usize = rows
        .iter()
        .map(|r| r.iter().map(|p| if p.is_zero() { 0 } else { p.degree() }).max().unwrap_or(0))
        .sum();
    let points = degree + 1;
    let values: Vec<Complex64> = (0..points)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / points as f64);
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j].eval(z));
            m.determinant()
        })
        .collect();
    let coeffs = (0..points)
        .map(|j| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    v * Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * (j * k) as f64 / points as f64,
                    )
                })
                .sum();
            sum / points as f64
        })
        .collect();
    Polynomial::new(coeffs)
}
