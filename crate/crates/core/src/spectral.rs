//! First-passage generators by the spectral method, and the occupation
//! matrix at level zero.
//!
//! The generator `Lambda` of the upward first-passage chain `J(tau_x^+)`
//! satisfies `F(gamma) v = 0` for every eigenpair `(gamma, v)` of `-Lambda`,
//! with the `gamma` exactly the zeros of `det F` in the closed right
//! half-plane. The killed generator is obtained the same way from
//! `F(theta) - diag(omega)`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::MapModel;
use crate::numerics::{
    adjugate, inverse_complex, null_vector, poly_det, real_part, CMatrix, Polynomial, RMatrix,
};
use crate::tol::TOL;

/// `p(theta) = det(F(theta) - Delta) d(theta)`, where `d` is the product of all
/// phase-type denominators entering `F`.
#[derive(Debug, Clone)]
pub struct ClearedDeterminant {
    pub p: Polynomial,
    pub d: Polynomial,
}

impl ClearedDeterminant {
    pub fn eval_ratio(&self, theta: Complex64) -> Complex64 {
        self.p.eval(theta) / self.d.eval(theta)
    }
}

pub fn cleared_determinant(model: &MapModel, killed: bool) -> ClearedDeterminant {
    let form = model.polynomial_form(killed);
    let p = poly_det(&form.rows).real_part();
    let d = form
        .row_scale
        .iter()
        .fold(Polynomial::one(), |acc, r| &acc * r)
        .real_part();
    ClearedDeterminant { p, d }
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues of `-Lambda`: the closed right half-plane zeros.
    pub gammas: Vec<Complex64>,
    /// Right null vectors `F_hat(gamma_k) v_k = 0`, as columns.
    pub v: CMatrix,
    /// `-V diag(gamma) V^{-1}`.
    pub lambda: RMatrix,
    pub killed: bool,
}

impl SpectralData {
    /// Eigenvalues of `Lambda` itself.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.gammas.iter().map(|g| -g).collect()
    }
}

/// Drift magnitude below which the model counts as driftless.
fn zero_drift_threshold(model: &MapModel) -> f64 {
    1e-12 * model.premium().iter().cloned().fold(1.0, f64::max)
}

/// Sorts roots and makes conjugate pairs exact; near-real roots become real.
fn pair_conjugates(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    for z in roots.iter_mut() {
        if z.im.abs() <= TOL.imag_residue * (1.0 + z.norm()) {
            z.im = 0.0;
        }
    }
    let mut out = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = roots[i];
        out.push(z);
        if z.im == 0.0 {
            continue;
        }
        let partner = (0..roots.len())
            .filter(|&j| !used[j] && roots[j].im * z.im < 0.0)
            .min_by(|&a, &b| {
                (roots[a] - z.conj())
                    .norm()
                    .partial_cmp(&(roots[b] - z.conj()).norm())
                    .unwrap()
            });
        if let Some(j) = partner {
            used[j] = true;
            out.push(z.conj());
        }
    }
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    out
}

fn check_simple(roots: &[Complex64], repeated: impl Fn(Complex64) -> Error) -> Result<()> {
    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            if (a - b).norm() <= TOL.root_separation * (1.0 + a.norm()) {
                return Err(repeated(*a));
            }
        }
    }
    Ok(())
}

/// Generator of `J(tau_x^+)`, unkilled or killed at rates `omega`.
pub fn phase_matrix(model: &MapModel, killed: bool) -> Result<SpectralData> {
    let n = model.states();
    let killed = killed && !model.is_unobserved();
    let mu = model.drift().mu;
    let zero_drift = zero_drift_threshold(model);
    if !killed && mu < -zero_drift {
        return Err(Error::DefectiveDrift { mu });
    }

    let det = cleared_determinant(model, killed);
    let mut roots: Vec<Complex64> = det
        .p
        .roots()?
        .into_iter()
        .filter(|z| z.re >= -TOL.imag_axis)
        .collect();

    if !killed {
        // 0 is a simple zero when mu > 0 and a double one when mu = 0; replace
        // the numerical cluster by the exact root.
        let cluster = if mu.abs() <= zero_drift { 2 } else { 1 };
        let mut all: Vec<Complex64> = det.p.roots()?;
        all.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        let near_zero: Vec<Complex64> = all.into_iter().take(cluster).collect();
        roots.retain(|z| !near_zero.iter().any(|c| c == z));
        roots.push(Complex64::new(0.0, 0.0));
    }

    let roots = pair_conjugates(roots);
    if roots.len() != n {
        return Err(Error::WrongRootCount {
            expected: n,
            found: roots.len(),
        });
    }
    check_simple(&roots, |value| Error::RepeatedEigenvalue { value })?;

    let mut v = CMatrix::zeros(n, n);
    for (k, &gamma) in roots.iter().enumerate() {
        let column = if gamma == Complex64::new(0.0, 0.0) && !killed {
            DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0))
        } else if gamma.im < 0.0 {
            // The conjugate partner sits right after this root in sorted order.
            let partner = roots
                .iter()
                .position(|&z| z == gamma.conj())
                .expect("conjugate pairs are exact");
            let mut col = null_vector(&exponent(model, killed, gamma.conj())?)?;
            col.iter_mut().for_each(|z| *z = z.conj());
            debug_assert!(partner != k);
            col
        } else {
            null_vector(&exponent(model, killed, gamma)?)?
        };
        let m = exponent(model, killed, gamma)?;
        let residual = (&m * &column).norm();
        if residual > TOL.null_residual * m.norm().max(1.0) {
            return Err(Error::Numerical(format!(
                "null vector residual {residual:.3e} at gamma = {gamma}"
            )));
        }
        v.set_column(k, &column);
    }

    let v_inv = inverse_complex(&v, "eigenvector matrix")?;
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(n, roots.iter().map(|g| -g)));
    let lambda = real_part(&(&v * diag * v_inv), "first-passage generator")?;

    if !killed {
        let scale = lambda.iter().map(|x| x.abs()).fold(1.0, f64::max);
        for i in 0..n {
            let row: f64 = lambda.row(i).sum();
            if row.abs() > TOL.generator_rows * scale {
                return Err(Error::Numerical(format!(
                    "first-passage generator row {i} sums to {row:.3e}"
                )));
            }
            for j in 0..n {
                if i != j && lambda[(i, j)] < -1e-10 * scale {
                    return Err(Error::Numerical(format!(
                        "first-passage generator has negative rate at ({i}, {j})"
                    )));
                }
            }
        }
    }

    Ok(SpectralData {
        gammas: roots,
        v,
        lambda,
        killed,
    })
}

fn exponent(model: &MapModel, killed: bool, theta: Complex64) -> Result<CMatrix> {
    if killed {
        model.eval_f_killed(theta)
    } else {
        model.eval_f(theta)
    }
}

/// Generator `Lambda~` of the time-reversed model.
pub fn time_reversed_phase_matrix(model: &MapModel) -> Result<SpectralData> {
    phase_matrix(&model.time_reverse(), false)
}

/// Expected occupation times at level zero: the limit `L` of
/// `L(x) = exp(Lambda x) W(x)`.
#[derive(Debug, Clone)]
pub struct OccupationMatrix {
    pub l: RMatrix,
}

/// Builds `L` row-block by row-block from the left eigenvectors `h` of
/// `-Lambda`: for a simple zero `gamma` of `det F`,
/// `h L = lim_{q -> 0} q h F(gamma + q)^{-1} = h adj F(gamma) / (det F)'(gamma)`,
/// with `(det F)' = tr(adj F F')` by Jacobi's formula.
pub fn occupation_matrix(model: &MapModel, spectral: &SpectralData) -> Result<OccupationMatrix> {
    if spectral.killed {
        return Err(Error::InvalidArgument(
            "occupation matrix needs the unkilled first-passage generator".into(),
        ));
    }
    let mu = model.drift().mu;
    if mu.abs() <= zero_drift_threshold(model) {
        return Err(Error::ZeroDrift);
    }
    let n = model.states();
    let h = inverse_complex(&spectral.v, "eigenvector matrix")?;
    let mut stacked = CMatrix::zeros(n, n);
    for (k, &gamma) in spectral.gammas.iter().enumerate() {
        let f = model.eval_f(gamma)?;
        let adj = adjugate(&f);
        let det_derivative = (&adj * model.eval_f_derivative(gamma)?).trace();
        let row = h.row(k) * &adj / det_derivative;
        stacked.set_row(k, &row);
    }
    let l = real_part(&(&spectral.v * stacked), "occupation matrix")?;
    if l.iter().any(|&x| x < -1e-9 * l.norm()) {
        return Err(Error::Numerical("occupation matrix has negative entries".into()));
    }
    Ok(OccupationMatrix { l })
}
