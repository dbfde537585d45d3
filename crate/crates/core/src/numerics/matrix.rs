//! Small dense matrix kernels.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::TOL;

pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant
/// (delegated to nalgebra).
pub fn mat_exp(m: &RMatrix) -> RMatrix {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.clone().exp()
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Real part of `m`, provided the imaginary parts are negligible relative to
/// the largest entry.
pub fn real_part(m: &CMatrix, what: &str) -> Result<RMatrix> {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let worst = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > TOL.imag_residue * scale {
        return Err(Error::Numerical(format!(
            "{what} has imaginary residue {worst:.3e}"
        )));
    }
    Ok(m.map(|z| z.re))
}

/// 2-norm condition number from the singular values.
pub fn cond(m: &RMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn cond_complex(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(m: &RMatrix, what: &str) -> Result<RMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{what} is singular")))
}

pub fn inverse_complex(m: &CMatrix, what: &str) -> Result<CMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{what} is singular")))
}

/// Adjugate of a square matrix, computed from cofactors so it stays defined
/// at singular arguments.
pub fn adjugate(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    if n == 1 {
        return CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    }
    let mut adj = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(j, i)] = minor.determinant() * sign;
        }
    }
    adj
}

/// Unit vector spanning the direction of the smallest singular value of `m`.
///
/// The phase is fixed so that the first entry of largest modulus is real and
/// positive.
pub fn null_vector(m: &CMatrix) -> Result<DVector<Complex64>> {
    let n = m.ncols();
    if n == 1 {
        // No relative scale exists for a scalar; compare against 1.
        let ratio = m[(0, 0)].norm();
        if ratio >= TOL.null_ratio {
            return Err(Error::NotSingular { ratio });
        }
        return Ok(DVector::from_element(1, Complex64::new(1.0, 0.0)));
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let ratio = if smax == 0.0 { 0.0 } else { smin / smax };
    if ratio >= TOL.null_ratio {
        return Err(Error::NotSingular { ratio });
    }
    let mut v = DVector::from_iterator(n, (0..n).map(|j| vt[(imin, j)].conj()));
    normalize_phase(&mut v);
    Ok(v)
}

/// Scales `v` to unit norm with its first largest-modulus entry real positive.
pub fn normalize_phase(v: &mut DVector<Complex64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    let biggest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v
        .iter()
        .position(|z| z.norm() >= biggest * (1.0 - 1e-10))
        .unwrap_or(0);
    let phase = v[pivot] / v[pivot].norm();
    let factor = phase.conj() / norm;
    for z in v.iter_mut() {
        *z *= factor;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

/// Stationary row vector of an irreducible generator.
pub fn stationary_of_generator(g: &RMatrix) -> Result<RowDVector<f64>> {
    let n = g.nrows();
    if n != g.ncols() || n == 0 {
        return Err(Error::InvalidArgument("generator must be square".into()));
    }
    let row_sums: Vec<f64> = g.row_iter().map(|r| r.sum()).collect();
    let scale = g.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let min_row_sum = row_sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_row_sum = row_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min_row_sum < -TOL.generator_rows * scale {
        return Err(Error::DefectiveGenerator { min_row_sum });
    }
    if max_row_sum > TOL.generator_rows * scale {
        return Err(Error::InvalidArgument(format!(
            "matrix has positive row sum {max_row_sum:.3e}"
        )));
    }
    // pi G = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = g.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("generator is reducible".into()))?;
    if pi.iter().any(|&p| p < -1e-10) {
        return Err(Error::InvalidArgument("generator is reducible".into()));
    }
    let pi = pi.map(|p| p.max(0.0));
    let total = pi.sum();
    Ok((pi / total).transpose())
}
