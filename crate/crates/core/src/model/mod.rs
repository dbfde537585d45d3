//! Markov-modulated risk model, its matrix exponent `F(theta)` and drift.

mod document;
mod phase;

use std::collections::BTreeMap;

use nalgebra::RowDVector;
use num_complex::Complex64;

pub use document::{ModelDocument, PhaseDocument};
pub use phase::PhaseType;

use crate::error::{Error, Result};
use crate::numerics::{stationary_of_generator, CMatrix, Polynomial, RMatrix};
use crate::tol::TOL;

/// Markov additive risk process: between environment switches, state `i`
/// evolves as `premium[i] t + sigma[i] B(t)` minus compound Poisson claims at
/// rate `claim_rate[i]`. A switch `i -> j` may carry a downward jump. Ruin is
/// checked by an observer arriving at rate `omega[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapModel {
    q: RMatrix,
    premium: Vec<f64>,
    sigma: Vec<f64>,
    claim_rate: Vec<f64>,
    claims: Vec<PhaseType>,
    omega: Vec<f64>,
    jumps: BTreeMap<(usize, usize), PhaseType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub pi: RowDVector<f64>,
    pub mu: f64,
}

/// `R(theta) F_hat(theta)` as a polynomial matrix, where the diagonal row
/// scaling `R` clears every phase-type denominator appearing in that row.
#[derive(Debug, Clone)]
pub struct PolynomialForm {
    pub rows: Vec<Vec<Polynomial>>,
    pub row_scale: Vec<Polynomial>,
}

impl MapModel {
    pub fn new(
        q: RMatrix,
        premium: Vec<f64>,
        sigma: Vec<f64>,
        claim_rate: Vec<f64>,
        claims: Vec<PhaseType>,
        omega: Vec<f64>,
        jumps: BTreeMap<(usize, usize), PhaseType>,
    ) -> Result<Self> {
        let model = MapModel {
            q,
            premium,
            sigma,
            claim_rate,
            claims,
            omega,
            jumps,
        };
        model.validate()?;
        Ok(model)
    }

    /// Two-state Markov-modulated Cramér-Lundberg model with unit premiums,
    /// exponential(1) claims at rates (1, 0.5), switching rates 1 and
    /// observation rates (0.4, 0.2).
    pub fn two_state_example() -> Self {
        let exp1 = PhaseType::exponential(1.0).expect("valid law");
        MapModel::new(
            RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![exp1.clone(), exp1],
            vec![0.4, 0.2],
            BTreeMap::new(),
        )
        .expect("built-in example is valid")
    }

    /// Parses and validates a JSON model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from_model(self))
            .expect("model documents always serialize")
    }

    fn validate(&self) -> Result<()> {
        let n = self.q.nrows();
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if n == 0 {
            return bad("model needs at least one state".into());
        }
        if self.q.ncols() != n {
            return bad("Q must be square".into());
        }
        for (name, len) in [
            ("premium", self.premium.len()),
            ("sigma", self.sigma.len()),
            ("claim_rate", self.claim_rate.len()),
            ("claims", self.claims.len()),
            ("omega", self.omega.len()),
        ] {
            if len != n {
                return bad(format!("dimension mismatch: {name} has length {len}, expected {n}"));
            }
        }
        let finite = self.q.iter().all(|x| x.is_finite())
            && [&self.premium, &self.sigma, &self.claim_rate, &self.omega]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return bad("non-finite parameter".into());
        }

        let scale = self.q.iter().map(|x| x.abs()).fold(1.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                if i != j && self.q[(i, j)] < 0.0 {
                    return bad(format!("Q is not a generator: negative rate q[{i}][{j}]"));
                }
            }
            let row: f64 = self.q.row(i).sum();
            if row.abs() > 1e-10 * scale {
                return bad(format!("Q is not a generator: row {i} sums to {row}"));
            }
        }
        if !self.is_irreducible() {
            return bad("Q is reducible".into());
        }
        for i in 0..n {
            if self.premium[i] <= 0.0 {
                return bad(format!(
                    "premium[{i}] = {} must be positive (state would be non-increasing)",
                    self.premium[i]
                ));
            }
            if self.sigma[i] < 0.0 {
                return bad(format!("sigma[{i}] is negative"));
            }
            if self.claim_rate[i] < 0.0 {
                return bad(format!("claim_rate[{i}] is negative"));
            }
            if self.omega[i] < 0.0 {
                return bad(format!("omega[{i}] is negative"));
            }
        }
        for &(i, j) in self.jumps.keys() {
            if i >= n || j >= n || i == j {
                return bad(format!("jump key ({i}, {j}) is not an off-diagonal transition"));
            }
            if self.q[(i, j)] == 0.0 {
                return bad(format!("jump law given for transition ({i}, {j}) with zero rate"));
            }
        }
        Ok(())
    }

    fn is_irreducible(&self) -> bool {
        let n = self.q.nrows();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let rate = if forward { self.q[(i, j)] } else { self.q[(j, i)] };
                    if i != j && rate > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    pub fn states(&self) -> usize {
        self.q.nrows()
    }

    pub fn generator(&self) -> &RMatrix {
        &self.q
    }

    pub fn premium(&self) -> &[f64] {
        &self.premium
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn claim_rate(&self) -> &[f64] {
        &self.claim_rate
    }

    pub fn claims(&self) -> &[PhaseType] {
        &self.claims
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn jumps(&self) -> &BTreeMap<(usize, usize), PhaseType> {
        &self.jumps
    }

    pub fn jump(&self, from: usize, to: usize) -> Option<&PhaseType> {
        self.jumps.get(&(from, to))
    }

    /// `diag(omega)`.
    pub fn killing(&self) -> RMatrix {
        RMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.omega))
    }

    pub fn is_unobserved(&self) -> bool {
        self.omega.iter().all(|&w| w == 0.0)
    }

    /// Same model with different observation rates.
    pub fn with_omega(&self, omega: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.omega = omega;
        m.validate()?;
        Ok(m)
    }

    /// Laplace exponent of the Lévy component in state `i`:
    /// `c theta + sigma^2 theta^2 / 2 - beta (1 - E exp(-theta Y))`.
    pub fn levy_exponent(&self, i: usize, theta: Complex64) -> Result<Complex64> {
        let mut psi = theta * self.premium[i] + theta * theta * (0.5 * self.sigma[i].powi(2));
        if self.claim_rate[i] > 0.0 {
            let f = self.claims[i].lst(theta)?;
            psi -= (Complex64::new(1.0, 0.0) - f) * self.claim_rate[i];
        }
        Ok(psi)
    }

    /// Matrix exponent `F(theta)` with `E[exp(theta X(t)); J(t)] = exp(F(theta) t)`.
    pub fn eval_f(&self, theta: Complex64) -> Result<CMatrix> {
        let n = self.states();
        let mut f = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let q = self.q[(i, j)];
                f[(i, j)] = if i == j {
                    self.levy_exponent(i, theta)? + q
                } else if q > 0.0 {
                    match self.jump(i, j) {
                        Some(law) => law.lst(theta)? * q,
                        None => Complex64::new(q, 0.0),
                    }
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        Ok(f)
    }

    /// Killed exponent `F(theta) - diag(omega)`.
    pub fn eval_f_killed(&self, theta: Complex64) -> Result<CMatrix> {
        let mut f = self.eval_f(theta)?;
        for i in 0..self.states() {
            f[(i, i)] -= self.omega[i];
        }
        Ok(f)
    }

    /// Central finite-difference derivative of `F` at `theta`.
    pub fn eval_f_derivative(&self, theta: Complex64) -> Result<CMatrix> {
        let h = TOL.fd_step * (1.0 + theta.norm());
        let hc = Complex64::new(h, 0.0);
        let plus = self.eval_f(theta + hc)?;
        let minus = self.eval_f(theta - hc)?;
        Ok((plus - minus) / Complex64::new(2.0 * h, 0.0))
    }

    /// Stationary law of the environment and asymptotic drift
    /// `mu = pi F'(0) 1`, using the closed-form phase-type means.
    pub fn drift(&self) -> DriftReport {
        let pi = stationary_of_generator(&self.q).expect("validated generator is irreducible");
        let n = self.states();
        let mut mu = 0.0;
        for i in 0..n {
            let mut rate = self.premium[i];
            if self.claim_rate[i] > 0.0 {
                rate -= self.claim_rate[i] * self.claims[i].mean();
            }
            for j in 0..n {
                if let Some(law) = self.jump(i, j) {
                    rate -= self.q[(i, j)] * law.mean();
                }
            }
            mu += pi[i] * rate;
        }
        DriftReport { pi, mu }
    }

    /// Time-reversed model, whose exponent is
    /// `diag(pi)^{-1} F(theta)^T diag(pi)`: same state dynamics, reversed
    /// switching rates `pi_j q_ji / pi_i`, and the jump of `j -> i` moved to
    /// `i -> j`.
    pub fn time_reverse(&self) -> MapModel {
        let pi = self.drift().pi;
        let n = self.states();
        let mut q = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    q[(i, j)] = pi[j] * self.q[(j, i)] / pi[i];
                }
            }
            q[(i, i)] = -(0..n).filter(|&j| j != i).map(|j| q[(i, j)]).sum::<f64>();
        }
        let jumps = self
            .jumps
            .iter()
            .map(|(&(i, j), law)| ((j, i), law.clone()))
            .collect();
        MapModel {
            q,
            premium: self.premium.clone(),
            sigma: self.sigma.clone(),
            claim_rate: self.claim_rate.clone(),
            claims: self.claims.clone(),
            omega: self.omega.clone(),
            jumps,
        }
    }

    /// `W(0) = lim theta F(theta)^{-1}`: `1 / c_i` on the diagonal for
    /// bounded-variation states, 0 where a Brownian part is present.
    pub fn scale_at_zero(&self) -> RMatrix {
        let n = self.states();
        RMatrix::from_fn(n, n, |i, j| {
            if i == j && self.sigma[i] == 0.0 {
                1.0 / self.premium[i]
            } else {
                0.0
            }
        })
    }

    /// Polynomial form of the (optionally killed) exponent. Only laws that
    /// actually enter `F` (positive claim rate, positive switching rate)
    /// contribute to the row scaling.
    pub fn polynomial_form(&self, killed: bool) -> PolynomialForm {
        let n = self.states();
        let mut rows = Vec::with_capacity(n);
        let mut row_scale = Vec::with_capacity(n);
        for i in 0..n {
            // The law feeding column j of this row, if any: the claim law on
            // the diagonal, a jump law off it.
            let law_of = |j: usize| -> Option<&PhaseType> {
                if j == i {
                    (self.claim_rate[i] > 0.0).then(|| &self.claims[i])
                } else if self.q[(i, j)] > 0.0 {
                    self.jump(i, j)
                } else {
                    None
                }
            };
            let denominators: Vec<Option<Polynomial>> =
                (0..n).map(|j| law_of(j).map(PhaseType::denominator)).collect();
            let scale = denominators.iter().flatten().fold(Polynomial::one(), |acc, d| &acc * d);
            // Product of every denominator except the one of column k.
            let others = |k: usize| {
                denominators
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .filter_map(|(_, d)| d.as_ref())
                    .fold(Polynomial::one(), |acc, d| &acc * d)
            };

            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let entry = if i == j {
                    let kill = if killed { self.omega[i] } else { 0.0 };
                    let base = Polynomial::from_real(&[
                        self.q[(i, i)] - self.claim_rate[i] - kill,
                        self.premium[i],
                        0.5 * self.sigma[i].powi(2),
                    ]);
                    let mut e = &scale * &base;
                    if let Some(law) = law_of(i) {
                        let claims = (&others(i) * &law.numerator())
                            .scale(Complex64::new(self.claim_rate[i], 0.0));
                        e = &e + &claims;
                    }
                    e
                } else if self.q[(i, j)] > 0.0 {
                    let rate = Complex64::new(self.q[(i, j)], 0.0);
                    match law_of(j) {
                        Some(law) => (&others(j) * &law.numerator()).scale(rate),
                        None => scale.scale(rate),
                    }
                } else {
                    Polynomial::zero()
                };
                row.push(entry);
            }
            rows.push(row);
            row_scale.push(scale);
        }
        PolynomialForm { rows, row_scale }
    }
}
