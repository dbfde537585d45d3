//! Dense polynomials with complex coefficients and companion-matrix root finding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::tol::TOL;

/// Polynomial stored by ascending degree: `coeffs[k]` multiplies `theta^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds a polynomial, trimming leading coefficients that are negligible
    /// relative to the largest coefficient.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while coeffs.len() > 1 {
            let lead = coeffs[coeffs.len() - 1].norm();
            if lead > TOL.poly_trim * scale {
                break;
            }
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Polynomial { coeffs }
    }

    /// Exact constructor: keeps every coefficient (only exact zeros are trimmed).
    pub fn from_exact(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == Complex64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Polynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::from_exact(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: f64) -> Self {
        Self::from_real(&[c])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `theta - root`.
    pub fn linear(root: Complex64) -> Self {
        Self::from_exact(vec![-root, Complex64::new(1.0, 0.0)])
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn eval(&self, theta: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * theta + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::zero();
        }
        Polynomial::from_exact(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, factor: Complex64) -> Polynomial {
        Polynomial::from_exact(self.coeffs.iter().map(|&c| c * factor).collect())
    }

    /// Rounds away imaginary parts; used for polynomials known to be real.
    pub fn real_part(&self) -> Polynomial {
        Polynomial::from_exact(self.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect())
    }

    /// All roots, with multiplicity, from the eigenvalues of the companion
    /// matrix of the monic normalization, each polished by Newton's method.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let p = Polynomial::new(self.coeffs.clone());
        let deg = p.degree();
        if deg == 0 {
            return Err(Error::ConstantPolynomial);
        }
        let lead = p.leading();
        let monic: Vec<Complex64> = p.coeffs.iter().map(|&c| c / lead).collect();

        let mut companion = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -monic[i];
        }
        let schur = companion.schur();
        let (_, t) = schur.unpack();
        let dp = p.derivative();
        let roots = (0..deg).map(|i| p.newton_polish(&dp, t[(i, i)])).collect();
        Ok(roots)
    }

    fn newton_polish(&self, dp: &Polynomial, start: Complex64) -> Complex64 {
        let mut z = start;
        let mut fz = self.eval(z).norm();
        for _ in 0..TOL.newton_steps {
            let d = dp.eval(z);
            if d.norm() == 0.0 || fz == 0.0 {
                break;
            }
            let next = z - self.eval(z) / d;
            let fnext = self.eval(next).norm();
            if !fnext.is_finite() || fnext >= fz {
                break;
            }
            z = next;
            fz = fnext;
        }
        z
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Polynomial::from_exact(
            (0..len)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(zero)
                        + rhs.coeffs.get(k).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::from_exact(out)
    }
}

/// Free-function form of [`Polynomial::roots`].
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    p.roots()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut r: Vec<Complex64>) -> Vec<Complex64> {
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        r
    }

    #[test]
    fn difference_of_squares() {
        let r = sorted(Polynomial::from_real(&[-1.0, 0.0, 1.0]).roots().unwrap());
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn imaginary_pair() {
        let r = sorted(Polynomial::from_real(&[1.0, 0.0, 1.0]).roots().unwrap());
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn triple_root() {
        // (t - 2)^3 = t^3 - 6 t^2 + 12 t - 8
        let r = Polynomial::from_real(&[-8.0, 12.0, -6.0, 1.0]).roots().unwrap();
        assert_eq!(r.len(), 3);
        for z in r {
            assert!((z - c(2.0, 0.0)).norm() < 1e-4, "{z}");
        }
    }

    #[test]
    fn constant_is_rejected() {
        assert!(matches!(
            Polynomial::constant(3.0).roots(),
            Err(Error::ConstantPolynomial)
        ));
    }

    #[test]
    fn trimming_drops_negligible_leading_terms() {
        let p = Polynomial::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(1e-15, 0.0)]);
        assert_eq!(p.degree(), 1);
    }

    #[test]
    fn arithmetic() {
        let a = Polynomial::from_real(&[1.0, 1.0]);
        let b = Polynomial::from_real(&[-1.0, 1.0]);
        assert_eq!(&a * &b, Polynomial::from_real(&[-1.0, 0.0, 1.0]));
        assert_eq!(&a - &a, Polynomial::zero());
        assert_eq!(a.derivative(), Polynomial::constant(1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roots_reproduce_coefficients(
                coeffs in prop::collection::vec(-5.0f64..5.0, 2..=12),
                lead in prop_oneof![0.5f64..3.0, -3.0f64..-0.5],
            ) {
                let mut cs = coeffs.clone();
                cs.push(lead);
                let p = Polynomial::from_real(&cs);
                let roots = p.roots().unwrap();
                prop_assert_eq!(roots.len(), p.degree());
                let mut rebuilt = Polynomial::constant(1.0).scale(p.leading());
                for r in &roots {
                    rebuilt = &rebuilt * &Polynomial::linear(*r);
                }
                let scale = p.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
                for (a, b) in p.coeffs().iter().zip(rebuilt.coeffs()) {
                    prop_assert!((a - b).norm() <= 1e-8 * scale, "{a} vs {b}");
                }
            }
        }
    }
}
