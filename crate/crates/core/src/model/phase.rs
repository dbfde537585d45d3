use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{poly_det, Polynomial, RMatrix};

/// Phase-type law: absorption time of a Markov chain started from `alpha`
/// with sub-generator `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: DVector<f64>,
    t: RMatrix,
}

impl PhaseType {
    pub fn new(alpha: Vec<f64>, t: RMatrix) -> Result<Self> {
        let m = alpha.len();
        let bad = |msg: String| Err(Error::InvalidModel(format!("phase-type law: {msg}")));
        if m == 0 {
            return bad("empty initial vector".into());
        }
        if t.nrows() != m || t.ncols() != m {
            return bad(format!("sub-generator must be {m}x{m}"));
        }
        if alpha.iter().chain(t.iter()).any(|x| !x.is_finite()) {
            return bad("non-finite entry".into());
        }
        if alpha.iter().any(|&a| a < 0.0) {
            return bad("negative initial probability".into());
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return bad(format!("initial vector sums to {total}, expected 1"));
        }
        for i in 0..m {
            if t[(i, i)] >= 0.0 {
                return bad(format!("diagonal entry {i} is not negative"));
            }
            let mut row = 0.0;
            for j in 0..m {
                if i != j && t[(i, j)] < 0.0 {
                    return bad(format!("negative off-diagonal entry ({i}, {j})"));
                }
                row += t[(i, j)];
            }
            if row > 1e-12 * t[(i, i)].abs() {
                return bad(format!("row {i} sums to {row} > 0"));
            }
        }
        let eig = t.complex_eigenvalues();
        if eig.iter().any(|z| z.re >= 0.0) {
            return bad("sub-generator is not invertible (absorption is not certain)".into());
        }
        Ok(PhaseType {
            alpha: DVector::from_vec(alpha),
            t,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Self::new(vec![1.0], RMatrix::from_element(1, 1, -rate))
    }

    /// Erlang law with `shape` phases of the given rate.
    pub fn erlang(shape: usize, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::InvalidModel("Erlang shape must be positive".into()));
        }
        let mut t = RMatrix::zeros(shape, shape);
        for i in 0..shape {
            t[(i, i)] = -rate;
            if i + 1 < shape {
                t[(i, i + 1)] = rate;
            }
        }
        let mut alpha = vec![0.0; shape];
        alpha[0] = 1.0;
        Self::new(alpha, t)
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn sub_generator(&self) -> &RMatrix {
        &self.t
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    /// Exit-rate vector `-T 1`.
    pub fn exit_rates(&self) -> DVector<f64> {
        -(&self.t * DVector::from_element(self.phases(), 1.0))
    }

    /// Mean `alpha (-T)^{-1} 1`.
    pub fn mean(&self) -> f64 {
        let ones = DVector::from_element(self.phases(), 1.0);
        let minus_t = -&self.t;
        let sol = minus_t.lu().solve(&ones).expect("validated sub-generator is invertible");
        self.alpha.dot(&sol)
    }

    /// If the law is a single exponential phase, its rate.
    pub fn as_exponential(&self) -> Option<f64> {
        (self.phases() == 1).then(|| -self.t[(0, 0)])
    }

    /// Laplace-Stieltjes transform `E exp(-theta Y) = alpha (theta I - T)^{-1} t`.
    pub fn lst(&self, theta: Complex64) -> Result<Complex64> {
        let m = self.phases();
        let shifted = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { theta } else { Complex64::new(0.0, 0.0) };
            d - self.t[(i, j)]
        });
        let exit = self.exit_rates().map(|x| Complex64::new(x, 0.0));
        let scale = self.t.iter().map(|x| x.abs()).fold(0.0, f64::max) + theta.norm();
        let lu = shifted.lu();
        if lu.determinant().norm() <= 1e-13 * scale.powi(m as i32) {
            return Err(Error::TransformPole(theta));
        }
        let sol = lu.solve(&exit).ok_or(Error::TransformPole(theta))?;
        Ok(self
            .alpha
            .iter()
            .zip(sol.iter())
            .map(|(&a, &s)| s * a)
            .sum())
    }

    /// `det(theta I - T)`, the denominator of the transform.
    pub fn denominator(&self) -> Polynomial {
        poly_det(&self.shifted_rows(None))
    }

    /// `alpha adj(theta I - T) t`, the numerator of the transform, via the
    /// matrix determinant lemma `det(M + t alpha) = det M + alpha adj(M) t`.
    pub fn numerator(&self) -> Polynomial {
        let with_rank_one = poly_det(&self.shifted_rows(Some(&self.exit_rates())));
        &with_rank_one - &self.denominator()
    }

    fn shifted_rows(&self, rank_one: Option<&DVector<f64>>) -> Vec<Vec<Polynomial>> {
        let m = self.phases();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut c = -self.t[(i, j)];
                        if let Some(exit) = rank_one {
                            c += exit[i] * self.alpha[j];
                        }
                        if i == j {
                            Polynomial::from_real(&[c, 1.0])
                        } else {
                            Polynomial::constant(c)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn exponential_transform() {
        let p = PhaseType::exponential(2.0).unwrap();
        assert!((p.lst(c(1.0)).unwrap() - c(2.0 / 3.0)).norm() < 1e-15);
        assert_eq!(p.mean(), 0.5);
        assert_eq!(p.denominator(), Polynomial::from_real(&[2.0, 1.0]));
        assert_eq!(p.numerator(), Polynomial::from_real(&[2.0]));
    }

    #[test]
    fn erlang_transform_and_mean() {
        let p = PhaseType::erlang(3, 2.0).unwrap();
        assert!((p.mean() - 1.5).abs() < 1e-14);
        let theta = c(0.7);
        let expected = (2.0f64 / 2.7).powi(3);
        assert!((p.lst(theta).unwrap() - c(expected)).norm() < 1e-14);
        let ratio = p.numerator().eval(theta) / p.denominator().eval(theta);
        assert!((ratio - c(expected)).norm() < 1e-14);
    }

    #[test]
    fn transform_pole_is_reported() {
        let p = PhaseType::exponential(1.0).unwrap();
        assert!(matches!(p.lst(c(-1.0)), Err(Error::TransformPole(_))));
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(PhaseType::new(vec![0.5, 0.4], RMatrix::identity(2, 2) * -1.0).is_err());
        assert!(PhaseType::new(vec![1.0], RMatrix::from_element(1, 1, 0.0)).is_err());
        assert!(PhaseType::new(
            vec![1.0, 0.0],
            RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0])
        )
        .is_err());
        assert!(PhaseType::exponential(-1.0).is_err());
    }
}
