//! Matrix scale function `W` by exact partial fractions of `F(theta)^{-1}`.
//!
//! With the row scaling `R(theta)` that clears all phase-type denominators,
//! `F^{-1} = adj(A) R / p` where `A = R F` is a polynomial matrix and
//! `p = det A`. When every zero `rho_k` of `p` is simple this inverts to
//! `W(x) = sum_k exp(rho_k x) C_k` with `C_k = adj(A(rho_k)) R(rho_k) / p'(rho_k)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::MapModel;
use crate::numerics::{inverse, real_part, to_complex, CMatrix, RMatrix};
use crate::spectral::cleared_determinant;
use crate::tol::TOL;

#[derive(Debug, Clone)]
pub struct ScaleFunction {
    pub rhos: Vec<Complex64>,
    pub cs: Vec<CMatrix>,
    pub w0: RMatrix,
}

/// `int_0^x exp(z y) dy`, with the confluent limit for `z` near 0.
pub(crate) fn exp_integral(z: Complex64, x: f64) -> Complex64 {
    if z.norm() <= TOL.confluent {
        Complex64::new(x, 0.0)
    } else {
        ((z * x).exp() - 1.0) / z
    }
}

pub fn build_scale_function(model: &MapModel) -> Result<ScaleFunction> {
    let n = model.states();
    let det = cleared_determinant(model, false);
    let mut rhos = det.p.roots()?;
    for z in rhos.iter_mut() {
        if z.im.abs() <= TOL.imag_residue * (1.0 + z.norm()) {
            z.im = 0.0;
        }
    }
    rhos.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    for (i, a) in rhos.iter().enumerate() {
        for b in &rhos[i + 1..] {
            if (a - b).norm() <= TOL.root_separation * (1.0 + a.norm()) {
                return Err(Error::RepeatedRoot { value: *a });
            }
        }
    }

    let form = model.polynomial_form(false);
    let dp = det.p.derivative();
    let residue = |rho: Complex64| {
        let a = CMatrix::from_fn(n, n, |i, j| form.rows[i][j].eval(rho));
        let mut adj = crate::numerics::adjugate(&a);
        for j in 0..n {
            let r = form.row_scale[j].eval(rho);
            adj.column_mut(j).iter_mut().for_each(|z| *z *= r);
        }
        adj / dp.eval(rho)
    };
    let mut cs: Vec<CMatrix> = Vec::with_capacity(rhos.len());
    for (k, &rho) in rhos.iter().enumerate() {
        // Conjugate roots get conjugate residues.
        let partner = (rho.im < 0.0)
            .then(|| rhos[..k].iter().position(|&z| (z - rho.conj()).norm() <= 1e-12 * (1.0 + z.norm())))
            .flatten();
        cs.push(match partner {
            Some(j) => cs[j].map(|z| z.conj()),
            None => residue(rho),
        });
    }

    let w0 = model.scale_at_zero();
    let total = cs.iter().fold(CMatrix::zeros(n, n), |acc, c| acc + c);
    let gap = (total - to_complex(&w0)).norm();
    if gap > 1e-8 * w0.norm().max(1.0) {
        return Err(Error::Numerical(format!(
            "residues sum to W(0) only within {gap:.3e}"
        )));
    }
    Ok(ScaleFunction { rhos, cs, w0 })
}

impl ScaleFunction {
    pub fn dim(&self) -> usize {
        self.w0.nrows()
    }

    fn combine(&self, weight: impl Fn(Complex64) -> Complex64) -> CMatrix {
        let n = self.dim();
        self.rhos
            .iter()
            .zip(&self.cs)
            .fold(CMatrix::zeros(n, n), |acc, (&rho, c)| acc + c * weight(rho))
    }

    pub fn eval_w(&self, x: f64) -> Result<RMatrix> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::InvalidArgument(format!("W(x) needs x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(self.w0.clone());
        }
        real_part(&self.combine(|rho| (rho * x).exp()), "W(x)")
    }

    /// `int_0^x exp(-theta y) W(y) dy` in closed form.
    pub fn integral_w(&self, theta: Complex64, x: f64) -> CMatrix {
        self.combine(|rho| exp_integral(rho - theta, x))
    }

    /// `Z(theta, x) = exp(theta x) (I - int_0^x exp(-theta y) W(y) dy F(theta))`.
    ///
    /// Away from the zeros `rho_k` the partial-fraction identity
    /// `sum_k C_k / (theta - rho_k) = F(theta)^{-1}` cancels the `exp(theta x)`
    /// part exactly, leaving `sum_k C_k exp(rho_k x) / (theta - rho_k) F(theta)`,
    /// which does not overflow for large `theta x`. Near a zero the integral
    /// is used directly.
    pub fn eval_z(&self, model: &MapModel, theta: Complex64, x: f64) -> Result<CMatrix> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::InvalidArgument(format!("Z(theta, x) needs x >= 0, got {x}")));
        }
        let n = self.dim();
        let f = model.eval_f(theta)?;
        if x == 0.0 {
            return Ok(CMatrix::identity(n, n));
        }
        let separation = self
            .rhos
            .iter()
            .map(|rho| (theta - rho).norm())
            .fold(f64::INFINITY, f64::min);
        if separation > 1e-3 * (1.0 + theta.norm()) {
            let tail = self.combine(|rho| (rho * x).exp() / (theta - rho));
            return Ok(tail * f);
        }
        Ok(self.eval_z_direct(theta, x, &f, n))
    }

    fn eval_z_direct(&self, theta: Complex64, x: f64, f: &CMatrix, n: usize) -> CMatrix {
        let e = (theta * x).exp();
        let weighted = self.combine(|rho| {
            let z = rho - theta;
            if z.norm() <= TOL.confluent {
                e * x
            } else {
                ((rho * x).exp() - e) / z
            }
        });
        CMatrix::identity(n, n) * e - weighted * f
    }

    fn check_levels(u: f64, x: f64) -> Result<()> {
        if !(0.0 <= u && u <= x && x > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "levels must satisfy 0 <= u <= x and x > 0 (u = {u}, x = {x})"
            )));
        }
        Ok(())
    }

    /// `P_u[tau_x^+ < tau_0^-, J(tau_x^+)] = W(u) W(x)^{-1}`.
    pub fn exit_up(&self, u: f64, x: f64) -> Result<RMatrix> {
        Self::check_levels(u, x)?;
        let m = self.eval_w(u)? * inverse(&self.eval_w(x)?, "W(x)")?;
        clip_probabilities(m, "upward exit probability")
    }

    /// `E_u[exp(theta X(tau_0^-)); tau_0^- < tau_x^+, J(tau_0^-)]
    ///  = Z(theta, u) - W(u) W(x)^{-1} Z(theta, x)`.
    pub fn exit_down_transform(
        &self,
        model: &MapModel,
        theta: Complex64,
        u: f64,
        x: f64,
    ) -> Result<CMatrix> {
        Self::check_levels(u, x)?;
        let ratio = self.eval_w(u)? * inverse(&self.eval_w(x)?, "W(x)")?;
        Ok(self.eval_z(model, theta, u)? - to_complex(&ratio) * self.eval_z(model, theta, x)?)
    }
}

/// Checks that `m` is a (sub-)probability matrix up to roundoff and clips
/// the roundoff away.
pub(crate) fn clip_probabilities(mut m: RMatrix, what: &'static str) -> Result<RMatrix> {
    for &value in m.iter() {
        if !(-TOL.prob_slack..=1.0 + TOL.prob_slack).contains(&value) {
            return Err(Error::OutOfRange { what, value });
        }
    }
    for row in m.row_iter() {
        let value = row.sum();
        if value > 1.0 + TOL.prob_slack {
            return Err(Error::OutOfRange { what, value });
        }
    }
    m.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhaseType;
    use std::collections::BTreeMap;

    fn brownian() -> MapModel {
        let exp1 = PhaseType::exponential(1.0).unwrap();
        MapModel::new(
            RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 0.5],
            vec![exp1.clone(), exp1],
            vec![0.4, 0.2],
            BTreeMap::new(),
        )
        .unwrap()
    }

    /// Composite Gauss-Legendre (5 points) on `n` panels; test-only oracle.
    fn gauss(f: impl Fn(f64) -> CMatrix, a: f64, b: f64, panels: usize) -> CMatrix {
        const X: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let h = (b - a) / panels as f64;
        let mut acc: Option<CMatrix> = None;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let term = f(mid + 0.5 * h * x) * Complex64::new(0.5 * h * w, 0.0);
                acc = Some(match acc {
                    Some(s) => s + term,
                    None => term,
                });
            }
        }
        acc.unwrap()
    }

    #[test]
    fn value_at_zero() {
        let sf = build_scale_function(&MapModel::two_state_example()).unwrap();
        assert_eq!(sf.eval_w(0.0).unwrap(), RMatrix::identity(2, 2));
        let total = sf.cs.iter().fold(CMatrix::zeros(2, 2), |a, c| a + c);
        assert!((total - CMatrix::identity(2, 2)).norm() < 1e-8);

        let sf = build_scale_function(&brownian()).unwrap();
        assert_eq!(sf.eval_w(0.0).unwrap(), RMatrix::zeros(2, 2));
        assert!(sf.eval_w(1e-6).unwrap().norm() < 1e-5);
    }

    #[test]
    fn conjugate_residues() {
        let sf = build_scale_function(&brownian()).unwrap();
        for (k, rho) in sf.rhos.iter().enumerate() {
            if let Some(j) = sf.rhos.iter().position(|z| *z == rho.conj()) {
                assert!((sf.cs[k].map(|z| z.conj()) - &sf.cs[j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn transform_identity_by_quadrature() {
        let model = MapModel::two_state_example();
        let sf = build_scale_function(&model).unwrap();
        let theta = 3.0;
        let integrand = |x: f64| to_complex(&(sf.eval_w(x).unwrap() * (-theta * x).exp()));
        let numeric = gauss(integrand, 0.0, 60.0, 600);
        let exact = model
            .eval_f(Complex64::new(theta, 0.0))
            .unwrap()
            .try_inverse()
            .unwrap();
        for (a, b) in numeric.iter().zip(exact.iter()) {
            assert!((a - b).norm() <= 1e-6 * b.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn nonsingular_and_rejects_negative_level() {
        let sf = build_scale_function(&MapModel::two_state_example()).unwrap();
        assert!(sf.eval_w(1.0).unwrap().determinant().abs() > 1e-6);
        assert!(sf.eval_w(-0.1).is_err());
    }

    #[test]
    fn z_matches_quadrature() {
        let model = MapModel::two_state_example();
        let sf = build_scale_function(&model).unwrap();
        let theta = Complex64::new(2.0, 0.0);
        let x = 1.5;
        let z = sf.eval_z(&model, theta, x).unwrap();
        let integral = gauss(
            |y| to_complex(&sf.eval_w(y).unwrap()) * (-theta * y).exp(),
            0.0,
            x,
            40,
        );
        let f = model.eval_f(theta).unwrap();
        let direct = (CMatrix::identity(2, 2) - integral * f) * (theta * x).exp();
        assert!((z - &direct).norm() < 1e-8);
        let f = model.eval_f(theta).unwrap();
        assert!((sf.eval_z_direct(theta, x, &f, 2) - direct).norm() < 1e-8);
        assert_eq!(
            sf.eval_z(&model, theta, 0.0).unwrap(),
            CMatrix::identity(2, 2)
        );
    }

    #[test]
    fn exit_matrices() {
        let model = MapModel::two_state_example();
        let sf = build_scale_function(&model).unwrap();
        let same = sf.exit_up(2.0, 2.0).unwrap();
        assert!((same - RMatrix::identity(2, 2)).norm() < 1e-12);
        let up = sf.exit_up(1.0, 3.0).unwrap();
        assert!(up.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(sf.exit_up(3.0, 1.0).is_err());

        let down = sf
            .exit_down_transform(&model, Complex64::new(1.0, 0.0), 2.0, 2.0)
            .unwrap();
        assert!(down.norm() < 1e-10);
        let far = sf
            .exit_down_transform(&model, Complex64::new(200.0, 0.0), 1.0, 4.0)
            .unwrap();
        assert!(far.norm() < 1e-2);

        let sf = build_scale_function(&brownian()).unwrap();
        let up = sf.exit_up(0.0, 2.0).unwrap();
        assert!(up.norm() < 1e-12);
    }

    #[test]
    fn exit_up_is_monotone_in_start() {
        let sf = build_scale_function(&MapModel::two_state_example()).unwrap();
        let mut previous = [0.0; 2];
        for k in 0..=8 {
            let up = sf.exit_up(0.5 * k as f64, 4.0).unwrap();
            for i in 0..2 {
                let s = up.row(i).sum();
                assert!(s >= previous[i] - 1e-12);
                previous[i] = s;
            }
        }
    }
}
