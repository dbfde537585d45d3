//! Reach and survival probabilities under Poissonian observation of ruin.
//!
//! With `B(x) = I - int_0^x W(y) Delta exp(Lambda_hat y) dy`, the matrix of
//! probabilities to reach `x` from 0 without being observed below zero is
//! `R(x) = exp(Lambda_hat x) B(x)^{-1}`, and from `u` it is
//! `R(u, x) = B(u) exp(Lambda_hat (x - u)) B(x)^{-1}`. Survival from 0 is
//! `U^{-1} 1` where `Lambda U - U Lambda_hat = L Delta`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DriftReport, MapModel};
use crate::numerics::{
    cond, cond_complex, inverse, inverse_complex, mat_exp, real_part, solve_sylvester,
    spectral_separation, stationary_of_generator, to_complex, CMatrix, RMatrix,
};
use crate::scale::{build_scale_function, clip_probabilities, ScaleFunction};
use crate::spectral::{
    occupation_matrix, phase_matrix, time_reversed_phase_matrix, OccupationMatrix, SpectralData,
};
use crate::tol::TOL;

/// Exponential-sum form of `M(x) = B(x) exp(-Lambda_hat x) = sum_k exp(rho_k x) T_k`
/// with `T_k = -C_k Delta (rho_k I + Lambda_hat)^{-1}` and `sum_k T_k = I`.
///
/// The `n` dominant terms are rank one, `T_j = p_j q_j^T`, so that
/// `R(x) = M(x)^{-1} = N(x)^{-1} exp(-diag(rho_lead) x) P^{-1}` with
/// `N(x) = Q^T + sum_{tail} exp(rho_k x - rho_j x) P^{-1} T_k` bounded in `x`.
#[derive(Debug, Clone)]
struct Expansion {
    terms: Vec<(Complex64, CMatrix)>,
    lead: Vec<usize>,
    /// Index of the leading term with exponent closest to zero.
    origin: usize,
    p_inv: CMatrix,
    q: CMatrix,
    tail: Vec<(Complex64, CMatrix)>,
}

impl Expansion {
    /// Terms of `M(x)` for the observed model.
    fn for_reach(model: &MapModel, sf: &ScaleFunction, lambda_hat: &RMatrix) -> Result<Self> {
        let n = model.states();
        let delta = to_complex(&model.killing());
        let lhat = to_complex(lambda_hat);
        let id = CMatrix::identity(n, n);
        let mut terms = Vec::with_capacity(sf.rhos.len());
        for (&rho, c) in sf.rhos.iter().zip(&sf.cs) {
            let resolvent = &id * rho + &lhat;
            let kappa = cond_complex(&resolvent);
            if kappa >= TOL.max_cond {
                return Err(Error::NearSingularResolvent { rho, cond: kappa });
            }
            let t = -(c * &delta * inverse_complex(&resolvent, "resolvent")?);
            terms.push((rho, t));
        }
        let total = terms.iter().fold(CMatrix::zeros(n, n), |acc, (_, t)| acc + t);
        if (&total - &id).norm() > 1e-6 * (1.0 + max_norm(&terms)) {
            return Err(Error::Numerical(format!(
                "exponential expansion does not start at I (defect {:.3e})",
                (&total - &id).norm()
            )));
        }
        Self::from_terms(terms, n)
    }

    /// Terms of the scale function `W(x)`.
    fn for_scale(sf: &ScaleFunction) -> Result<Self> {
        let terms = sf.rhos.iter().copied().zip(sf.cs.iter().cloned()).collect();
        Self::from_terms(terms, sf.dim())
    }

    fn from_terms(terms: Vec<(Complex64, CMatrix)>, n: usize) -> Result<Self> {
        if terms.len() < n {
            return Err(Error::Numerical("too few exponential terms".into()));
        }
        let mut order: Vec<usize> = (0..terms.len()).collect();
        order.sort_by(|&a, &b| terms[b].0.re.total_cmp(&terms[a].0.re));
        let lead: Vec<usize> = order[..n].to_vec();
        let origin = *lead
            .iter()
            .min_by(|&&a, &&b| terms[a].0.norm().total_cmp(&terms[b].0.norm()))
            .expect("n >= 1");

        let mut p = CMatrix::zeros(n, n);
        let mut q = CMatrix::zeros(n, n);
        for (j, &k) in lead.iter().enumerate() {
            let (col, row) = rank_one(&terms[k].1)?;
            p.set_column(j, &col);
            q.set_row(j, &row.transpose());
        }
        let kappa = cond_complex(&p);
        if kappa >= TOL.max_cond {
            return Err(Error::Numerical(format!(
                "dominant directions are degenerate (condition {kappa:.3e})"
            )));
        }
        let p_inv = inverse_complex(&p, "dominant directions")?;
        let tail = order[n..]
            .iter()
            .map(|&k| (terms[k].0, &p_inv * &terms[k].1))
            .collect();
        Ok(Expansion {
            terms,
            lead,
            origin,
            p_inv,
            q,
            tail,
        })
    }

    /// `(sum_k exp(rho_k x) T_k)^{-1}`.
    fn inverse_at(&self, x: f64) -> Result<RMatrix> {
        let n = self.q.nrows();
        let mut nx = self.q.clone();
        for (rho, b) in &self.tail {
            for (j, &k) in self.lead.iter().enumerate() {
                let f = ((rho - self.terms[k].0) * x).exp();
                for l in 0..n {
                    nx[(j, l)] += f * b[(j, l)];
                }
            }
        }
        let kappa = cond_complex(&nx);
        if kappa >= TOL.max_cond {
            return Err(Error::SingularBracket { x, cond: kappa });
        }
        let mut scaled = self.p_inv.clone();
        for (j, &k) in self.lead.iter().enumerate() {
            let f = (-self.terms[k].0 * x).exp();
            for l in 0..n {
                scaled[(j, l)] *= f;
            }
        }
        let r = inverse_complex(&nx, "bracket")? * scaled;
        real_part(&r, "inverse exponential sum")
    }

    /// `sum_k exp(rho_k u) T_k`.
    fn eval(&self, u: f64) -> Result<RMatrix> {
        let n = self.q.nrows();
        let m = self
            .terms
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, (rho, t)| acc + t * (rho * u).exp());
        real_part(&m, "exponential sum")
    }

    /// `M(u) phi0` with the growing exponentials dropped, provided their
    /// coefficients vanish.
    fn bounded_image(&self, phi0: &DVector<f64>, u: f64) -> Option<DVector<f64>> {
        let v = to_complex_vector(phi0);
        let mut out = nalgebra::DVector::<Complex64>::zeros(v.len());
        for (k, (rho, t)) in self.terms.iter().enumerate() {
            let image = t * &v;
            if k != self.origin && self.lead.contains(&k) {
                if image.norm() > 1e-7 * t.norm().max(1.0) * v.norm() {
                    return None;
                }
                continue;
            }
            out += image * (rho * u).exp();
        }
        let imag = out.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        (imag <= 1e-8).then(|| out.map(|z| z.re))
    }
}

fn max_norm(terms: &[(Complex64, CMatrix)]) -> f64 {
    terms.iter().map(|(_, t)| t.norm()).fold(0.0, f64::max)
}

fn to_complex_vector(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Factor a rank-one matrix as `col * row^T`.
fn rank_one(t: &CMatrix) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let (best, _) = (0..t.ncols())
        .map(|j| (j, t.column(j).norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty matrix");
    let col: DVector<Complex64> = t.column(best).into_owned();
    let scale = col.norm();
    if scale == 0.0 {
        return Err(Error::Numerical("vanishing dominant residue".into()));
    }
    let col = col / Complex64::new(scale, 0.0);
    let row: DVector<Complex64> = t.adjoint() * &col;
    let row = row.map(|z| z.conj());
    let defect = (t - &col * row.transpose()).norm();
    if defect > 1e-6 * t.norm() {
        return Err(Error::Numerical(format!(
            "dominant residue is not rank one (defect {defect:.3e})"
        )));
    }
    Ok((col, row))
}

/// Everything needed to evaluate reach and survival probabilities of one model.
#[derive(Debug, Clone)]
pub struct RuinEngine {
    model: MapModel,
    drift: DriftReport,
    sf: ScaleFunction,
    killed: SpectralData,
    /// Absent when the drift is negative.
    unkilled: Option<SpectralData>,
    /// Absent unless the drift is positive.
    occupation: Option<OccupationMatrix>,
    /// Absent when no state is observed.
    expansion: Option<Expansion>,
    scale_expansion: Option<Expansion>,
}

#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    pub us: Vec<f64>,
    pub phis: Vec<DVector<f64>>,
}

impl RuinEngine {
    pub fn new(model: MapModel) -> Result<Self> {
        let drift = model.drift();
        let killed = phase_matrix(&model, true)?;
        let unkilled = if drift.mu >= 0.0 {
            Some(phase_matrix(&model, false)?)
        } else {
            None
        };
        if let (Some(s), false) = (&unkilled, model.is_unobserved()) {
            let separation = spectral_separation(&s.lambda, &killed.lambda);
            if separation <= TOL.sylvester_gap * (s.lambda.norm() + killed.lambda.norm()) {
                return Err(Error::CommonEigenvalue { separation });
            }
        }
        let sf = build_scale_function(&model)?;
        let occupation = match &unkilled {
            Some(s) if drift.mu > 0.0 => Some(occupation_matrix(&model, s)?),
            _ => None,
        };
        let expansion = if model.is_unobserved() {
            None
        } else {
            Some(Expansion::for_reach(&model, &sf, &killed.lambda)?)
        };
        let scale_expansion = Expansion::for_scale(&sf).ok();
        Ok(RuinEngine {
            model,
            drift,
            sf,
            killed,
            unkilled,
            occupation,
            expansion,
            scale_expansion,
        })
    }

    pub fn model(&self) -> &MapModel {
        &self.model
    }

    pub fn drift(&self) -> &DriftReport {
        &self.drift
    }

    pub fn scale_function(&self) -> &ScaleFunction {
        &self.sf
    }

    /// Killed first-passage generator `Lambda_hat`.
    pub fn killed_generator(&self) -> &RMatrix {
        &self.killed.lambda
    }

    pub fn killed_spectral(&self) -> &SpectralData {
        &self.killed
    }

    /// Unkilled first-passage generator `Lambda`.
    pub fn generator(&self) -> Result<&RMatrix> {
        self.unkilled
            .as_ref()
            .map(|s| &s.lambda)
            .ok_or(Error::DefectiveDrift { mu: self.drift.mu })
    }

    pub fn occupation(&self) -> Result<&RMatrix> {
        match &self.occupation {
            Some(o) => Ok(&o.l),
            None if self.drift.mu < 0.0 => Err(Error::DefectiveDrift { mu: self.drift.mu }),
            None => Err(Error::ZeroDrift),
        }
    }

    /// Distance between the spectra of `Lambda` and `Lambda_hat`.
    pub fn spectral_gap(&self) -> Result<f64> {
        Ok(spectral_separation(self.generator()?, &self.killed.lambda))
    }

    /// `int_0^x W(y) Delta exp(Lambda_hat y) dy`
    /// `= sum_k C_k Delta (rho_k I + Lambda_hat)^{-1} (exp(rho_k x) exp(Lambda_hat x) - I)`.
    pub fn bracket_integral(&self, x: f64) -> Result<RMatrix> {
        check_level(x)?;
        let n = self.model.states();
        if x == 0.0 || self.model.is_unobserved() {
            return Ok(RMatrix::zeros(n, n));
        }
        let delta = to_complex(&self.model.killing());
        let lhat = to_complex(&self.killed.lambda);
        let e = to_complex(&mat_exp(&(&self.killed.lambda * x)));
        let id = CMatrix::identity(n, n);
        let mut total = CMatrix::zeros(n, n);
        for (&rho, c) in self.sf.rhos.iter().zip(&self.sf.cs) {
            let resolvent = &id * rho + &lhat;
            let kappa = cond_complex(&resolvent);
            if kappa >= TOL.max_cond {
                return Err(Error::NearSingularResolvent { rho, cond: kappa });
            }
            let inv = inverse_complex(&resolvent, "resolvent")?;
            total += c * &delta * inv * (&e * (rho * x).exp() - &id);
        }
        real_part(&total, "occupation integral")
    }

    fn reach_raw(&self, x: f64) -> Result<RMatrix> {
        if x == 0.0 {
            let n = self.model.states();
            return Ok(RMatrix::identity(n, n));
        }
        match &self.expansion {
            Some(e) => e.inverse_at(x),
            None => Ok(mat_exp(&(&self.killed.lambda * x))),
        }
    }

    /// `R(u)^{-1}`, checked against the condition bound.
    fn inverse_reach(&self, u: f64) -> Result<(RMatrix, f64)> {
        let m = match &self.expansion {
            Some(e) => e.eval(u)?,
            None => mat_exp(&(&self.killed.lambda * -u)),
        };
        let kappa = cond(&m);
        Ok((m, kappa))
    }

    /// `R(x)`: probabilities of reaching `x` from 0 without observed ruin,
    /// split by the environment state at the passage time.
    pub fn reach_matrix(&self, x: f64) -> Result<RMatrix> {
        check_level(x)?;
        clip_probabilities(self.reach_raw(x)?, "reach probability")
    }

    /// `R(u, x) = R(u)^{-1} R(x)` for `0 <= u <= x`.
    pub fn reach_matrix_between(&self, u: f64, x: f64) -> Result<RMatrix> {
        if !(0.0 <= u && u <= x && x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "levels must satisfy 0 <= u <= x (u = {u}, x = {x})"
            )));
        }
        let n = self.model.states();
        if u == x {
            return Ok(RMatrix::identity(n, n));
        }
        if u == 0.0 {
            return self.reach_matrix(x);
        }
        let (m, kappa) = self.inverse_reach(u)?;
        if kappa >= TOL.max_cond {
            return Err(Error::SingularBracket { x: u, cond: kappa });
        }
        clip_probabilities(m * self.reach_raw(x)?, "reach probability")
    }

    /// Solution `U` of `Lambda U - U Lambda_hat = L Delta`.
    pub fn sylvester_solution(&self) -> Result<RMatrix> {
        let lambda = self.generator()?;
        let l = self.occupation()?;
        solve_sylvester(lambda, &self.killed.lambda, &(l * self.model.killing()))
    }

    /// Survival probabilities with zero initial capital, by starting state.
    ///
    /// Ruin is certain for negative drift, so that case yields zeros.
    pub fn survival_at_zero(&self) -> Result<DVector<f64>> {
        let n = self.model.states();
        if self.drift.mu < 0.0 && !self.model.is_unobserved() {
            return Ok(DVector::zeros(n));
        }
        if let Some(state) = self.model.omega().iter().position(|&w| w == 0.0) {
            return Err(Error::NotAllObserved { state });
        }
        if self.drift.mu <= 0.0 || self.occupation.is_none() {
            return Err(Error::NonPositiveDrift { mu: self.drift.mu });
        }
        let u = self.sylvester_solution()?;
        let phi = u
            .lu()
            .solve(&DVector::from_element(n, 1.0))
            .ok_or_else(|| Error::Numerical("Sylvester solution is singular".into()))?;
        clip_vector(phi, "survival probability")
    }

    /// Survival probabilities `phi(u) = R(u)^{-1} phi(0)`.
    pub fn survival(&self, u: f64) -> Result<DVector<f64>> {
        check_level(u)?;
        let phi0 = self.survival_at_zero()?;
        if u == 0.0 || self.drift.mu < 0.0 {
            return Ok(phi0);
        }
        let expansion = self.expansion.as_ref().expect("observed model");
        if let Some(phi) = expansion.bounded_image(&phi0, u) {
            return clip_vector(phi, "survival probability");
        }
        let (m, kappa) = self.inverse_reach(u)?;
        if kappa >= TOL.max_cond {
            return Err(Error::IllConditioned {
                u,
                cond: kappa,
                usable: self.usable_capital(u),
            });
        }
        clip_vector(m * phi0, "survival probability")
    }

    /// Largest capital below `limit` for which `R(u)` is invertible within
    /// the condition bound.
    fn usable_capital(&self, limit: f64) -> f64 {
        let ok = |u: f64| {
            self.inverse_reach(u)
                .map(|(_, kappa)| kappa < TOL.max_cond)
                .unwrap_or(false)
        };
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn survival_curve(&self, us: &[f64]) -> Result<SurvivalCurve> {
        let phis = us.iter().map(|&u| self.survival(u)).collect::<Result<Vec<_>>>()?;
        Ok(SurvivalCurve {
            us: us.to_vec(),
            phis,
        })
    }

    /// Classical two-sided exit `W(u) W(x)^{-1}`: probabilities of reaching
    /// `x` from `u` before going below zero, by state at the passage time.
    pub fn classical_exit(&self, u: f64, x: f64) -> Result<RMatrix> {
        if !(0.0 <= u && u <= x && x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "levels must satisfy 0 <= u <= x and x > 0 (u = {u}, x = {x})"
            )));
        }
        let n = self.model.states();
        if u == x {
            return Ok(RMatrix::identity(n, n));
        }
        let w_inv = match &self.scale_expansion {
            Some(e) => e.inverse_at(x)?,
            None => inverse(&self.sf.eval_w(x)?, "W(x)")?,
        };
        clip_probabilities(self.sf.eval_w(u)? * w_inv, "classical exit probability")
    }

    /// Row sums of `I - Z(0, u) + W(u) W(x)^{-1} Z(0, x)`, the classical
    /// probabilities of reaching `x` before ruin written through `Z`.
    pub fn classical_exit_via_z(&self, u: f64, x: f64) -> Result<DVector<f64>> {
        if !(0.0 <= u && u <= x && x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "levels must satisfy 0 <= u <= x and x > 0 (u = {u}, x = {x})"
            )));
        }
        let n = self.model.states();
        let zero = Complex64::new(0.0, 0.0);
        let ratio = to_complex(&(self.sf.eval_w(u)? * inverse(&self.sf.eval_w(x)?, "W(x)")?));
        let m = CMatrix::identity(n, n) - self.sf.eval_z(&self.model, zero, u)?
            + ratio * self.sf.eval_z(&self.model, zero, x)?;
        let sums = real_part(&m, "classical exit")? * DVector::from_element(n, 1.0);
        clip_vector(sums, "classical exit probability")
    }

    /// Classical survival with zero capital:
    /// `(mu / c_i) (pi_rev)_i / pi_i` for bounded-variation states, where
    /// `pi_rev` is stationary for the time-reversed first-passage generator.
    pub fn classical_survival_at_zero(&self) -> Result<DVector<f64>> {
        let n = self.model.states();
        let mu = self.drift.mu;
        if mu <= 0.0 {
            return Ok(DVector::zeros(n));
        }
        let reversed = time_reversed_phase_matrix(&self.model)?;
        let pi_rev = stationary_of_generator(&reversed.lambda)?;
        let pi = &self.drift.pi;
        let phi = DVector::from_fn(n, |i, _| {
            if self.model.sigma()[i] > 0.0 {
                0.0
            } else {
                mu / self.model.premium()[i] * pi_rev[i] / pi[i]
            }
        });
        clip_vector(phi, "classical survival probability")
    }
}

fn check_level(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("level must be >= 0, got {x}")))
    }
}

fn clip_vector(v: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    for &value in v.iter() {
        if !(-TOL.prob_slack..=1.0 + TOL.prob_slack).contains(&value) {
            return Err(Error::OutOfRange { what, value });
        }
    }
    Ok(v.map(|p| p.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhaseType;
    use std::collections::BTreeMap;

    fn engine() -> RuinEngine {
        RuinEngine::new(MapModel::two_state_example()).unwrap()
    }

    fn scalar(beta: f64, omega: f64) -> MapModel {
        MapModel::new(
            RMatrix::zeros(1, 1),
            vec![1.0],
            vec![0.0],
            vec![beta],
            vec![PhaseType::exponential(1.0).unwrap()],
            vec![omega],
            BTreeMap::new(),
        )
        .unwrap()
    }

    /// Composite Simpson rule on `panels` (even) intervals; test-only oracle.
    fn simpson(f: impl Fn(f64) -> RMatrix, a: f64, b: f64, panels: usize) -> RMatrix {
        let h = (b - a) / panels as f64;
        let mut acc = f(a) + f(b);
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(a + k as f64 * h) * w;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn integral_matches_quadrature() {
        let e = engine();
        let delta = e.model().killing();
        let lhat = e.killed_generator().clone();
        let numeric = simpson(
            |y| e.sf.eval_w(y).unwrap() * &delta * mat_exp(&(&lhat * y)),
            0.0,
            2.0,
            2000,
        );
        assert!((e.bracket_integral(2.0).unwrap() - numeric).norm() < 1e-8);
        assert_eq!(e.bracket_integral(0.0).unwrap(), RMatrix::zeros(2, 2));
    }

    #[test]
    fn unobserved_model_reaches_with_certainty() {
        let m = MapModel::two_state_example().with_omega(vec![0.0, 0.0]).unwrap();
        let e = RuinEngine::new(m).unwrap();
        assert_eq!(e.bracket_integral(3.0).unwrap(), RMatrix::zeros(2, 2));
        let r = e.reach_matrix(3.0).unwrap();
        let expected = mat_exp(&(e.generator().unwrap() * 3.0));
        assert!((&r - expected).norm() < 1e-12);
        for i in 0..2 {
            assert!((r.row(i).sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reach_identities() {
        let e = engine();
        assert_eq!(e.reach_matrix(0.0).unwrap(), RMatrix::identity(2, 2));
        assert!((e.reach_matrix_between(2.0, 2.0).unwrap() - RMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((e.reach_matrix_between(0.0, 3.0).unwrap() - e.reach_matrix(3.0).unwrap()).norm() < 1e-14);
        let lhs = e.reach_matrix(1.0).unwrap() * e.reach_matrix_between(1.0, 3.0).unwrap();
        assert!((lhs - e.reach_matrix(3.0).unwrap()).norm() < 1e-10);
        assert!(e.reach_matrix_between(3.0, 1.0).is_err());
    }

    #[test]
    fn printed_sylvester_solution_and_survival() {
        let e = engine();
        let u = e.sylvester_solution().unwrap();
        let expected = [1.58, 0.58, 0.53, 1.54];
        for (k, v) in expected.iter().enumerate() {
            assert!((u[(k / 2, k % 2)] - v).abs() <= 0.01, "U = {u}");
        }
        let phi = e.survival_at_zero().unwrap();
        assert!((phi[0] - 0.45).abs() <= 0.005 && (phi[1] - 0.49).abs() <= 0.005, "{phi}");
        let l = e.occupation().unwrap();
        let residual = e.generator().unwrap() * &u - &u * e.killed_generator()
            - l * e.model().killing();
        assert!(residual.norm() <= 1e-10 * (l * e.model().killing()).norm());
    }

    #[test]
    fn limit_of_reach_probabilities() {
        let e = engine();
        let r = e.reach_matrix(50.0).unwrap();
        let phi = e.survival_at_zero().unwrap();
        for i in 0..2 {
            assert!((r.row(i).sum() - phi[i]).abs() <= 1e-3);
        }
    }

    #[test]
    fn scalar_survival_matches_right_inverse() {
        // F(theta) = theta - 0.5 theta / (1 + theta) = 0.3 gives
        // theta^2 + 0.2 theta - 0.3 = 0, theta = -0.1 + sqrt(0.31).
        let e = RuinEngine::new(scalar(0.5, 0.3)).unwrap();
        let phi_omega = -0.1 + 0.31f64.sqrt();
        let expected = phi_omega * 0.5 / 0.3;
        assert!((e.survival_at_zero().unwrap()[0] - expected).abs() < 1e-8);
        // R(x) = 1 / Z(Phi(omega), x).
        let z = e
            .sf
            .eval_z(e.model(), Complex64::new(phi_omega, 0.0), 2.0)
            .unwrap();
        assert!((e.reach_matrix(2.0).unwrap()[(0, 0)] - 1.0 / z[(0, 0)].re).abs() < 1e-10);
    }

    #[test]
    fn negative_drift_survival_is_zero() {
        let m = MapModel::new(
            RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![2.0, 2.0],
            vec![PhaseType::exponential(1.0).unwrap(), PhaseType::exponential(1.0).unwrap()],
            vec![0.4, 0.2],
            BTreeMap::new(),
        )
        .unwrap();
        let e = RuinEngine::new(m).unwrap();
        assert_eq!(e.survival_at_zero().unwrap(), DVector::zeros(2));
        assert_eq!(e.classical_survival_at_zero().unwrap(), DVector::zeros(2));
        // Reaching a finite level is still possible.
        assert!(e.reach_matrix(1.0).unwrap().row(0).sum() > 0.0);
    }

    #[test]
    fn partially_observed_model() {
        let m = MapModel::two_state_example().with_omega(vec![0.4, 0.0]).unwrap();
        let e = RuinEngine::new(m).unwrap();
        assert!(matches!(e.survival_at_zero(), Err(Error::NotAllObserved { state: 1 })));
        let r = e.reach_matrix(2.0).unwrap();
        assert!(r.row(0).sum() < 1.0);
    }

    #[test]
    fn survival_grid() {
        let e = engine();
        assert_eq!(e.survival(0.0).unwrap(), e.survival_at_zero().unwrap());
        let mut previous = DVector::zeros(2);
        for k in 0..=20 {
            let phi = e.survival(0.5 * k as f64).unwrap();
            for i in 0..2 {
                assert!(phi[i] >= previous[i] - 1e-9);
            }
            previous = phi;
        }
        // 1 - phi(u) decays like exp(rho u) for the zero rho < 0 closest to 0.
        let rho = e
            .sf
            .rhos
            .iter()
            .filter(|r| r.re < -1e-6)
            .map(|r| r.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let (a, b) = (e.survival(15.0).unwrap(), e.survival(20.0).unwrap());
        for i in 0..2 {
            let ratio = (1.0 - b[i]) / (1.0 - a[i]);
            assert!((ratio / (rho * 5.0).exp() - 1.0).abs() < 1e-2, "{ratio}");
        }
    }

    #[test]
    fn classical_quantities() {
        let e = engine();
        let ones = DVector::from_element(2, 1.0);
        for &(u, x) in &[(0.0, 0.5), (0.0, 5.0), (1.0, 4.0), (2.0, 2.5)] {
            let a = e.classical_exit(u, x).unwrap();
            assert!((&a * &ones - e.classical_exit_via_z(u, x).unwrap()).norm() < 1e-9);
            let direct = e.sf.eval_w(u).unwrap() * inverse(&e.sf.eval_w(x).unwrap(), "W").unwrap();
            assert!((a - direct).norm() < 1e-9);
        }
        assert_eq!(e.classical_exit(3.0, 3.0).unwrap(), RMatrix::identity(2, 2));

        let n1 = RuinEngine::new(scalar(0.5, 0.3)).unwrap();
        assert!((n1.classical_survival_at_zero().unwrap()[0] - 0.5).abs() < 1e-12);

        let phi = e.classical_survival_at_zero().unwrap();
        let far = e.classical_exit(0.0, 40.0).unwrap();
        for i in 0..2 {
            assert!((far.row(i).sum() - phi[i]).abs() < 1e-3, "{far} {phi}");
        }
    }

    #[test]
    fn common_eigenvalue_is_rejected() {
        let exp = PhaseType::exponential(1.0).unwrap();
        let m = MapModel::new(
            RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![0.5, 0.5],
            vec![exp.clone(), exp],
            vec![2.0, 2.0],
            BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(RuinEngine::new(m), Err(Error::CommonEigenvalue { .. })));
    }

    #[test]
    fn stable_reach_matches_direct_formula() {
        let e = engine();
        for &x in &[0.5, 2.0, 4.0] {
            let b = RMatrix::identity(2, 2) - e.bracket_integral(x).unwrap();
            let direct = mat_exp(&(e.killed_generator() * x)) * inverse(&b, "B").unwrap();
            assert!((e.reach_matrix(x).unwrap() - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn survival_matches_inverse_reach() {
        let e = engine();
        let phi0 = e.survival_at_zero().unwrap();
        for &u in &[0.5, 1.0, 3.0] {
            let r = e.reach_matrix(u).unwrap();
            let direct = r.lu().solve(&phi0).unwrap();
            assert!((e.survival(u).unwrap() - direct).norm() < 1e-9);
        }
        let far = e.survival(80.0).unwrap();
        assert!(far.iter().all(|&p| (p - 1.0).abs() < 1e-6), "{far}");
    }
}
