//! Univariate polynomials over the rationals.

use std::fmt;

use num_traits::{One, Zero};

use super::matrix::RatMatrix;
use super::rational::{format_rational, int, Rational};
use crate::error::Result;

/// Polynomial with coefficients in ascending degree order.
///
/// The coefficient vector never ends in a zero; the zero polynomial is empty.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct RatPoly {
    coeffs: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c * s^d`.
    pub fn monomial(c: Rational, d: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); d + 1];
        coeffs[d] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Coefficient of `s^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, c: &Rational) -> RatPoly {
        Self::new(self.coeffs.iter().map(|v| v * c).collect())
    }

    /// Monic associate; the zero polynomial stays zero.
    pub fn monic(&self) -> RatPoly {
        if self.is_zero() {
            return Self::zero();
        }
        self.scale(&self.leading().recip())
    }

    /// Euclidean division. Panics on division by the zero polynomial.
    pub fn div_rem(&self, divisor: &RatPoly) -> (RatPoly, RatPoly) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead_inv = divisor.leading().recip();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree().filter(|&d| d >= dd) else {
            return (Self::zero(), self.clone());
        };
        let mut quot = vec![Rational::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let c = &rem[k + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= &c * d;
            }
            quot[k] = c;
        }
        (Self::new(quot), Self::new(rem))
    }

    /// Monic greatest common divisor (zero only when both inputs are zero).
    pub fn gcd(&self, other: &RatPoly) -> RatPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> RatPoly {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i as i64))
                .collect(),
        )
    }

    /// Monic squarefree part `p / gcd(p, p')`: same roots, each with multiplicity one.
    pub fn squarefree_part(&self) -> RatPoly {
        if self.degree().unwrap_or(0) == 0 {
            return self.monic();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0.monic()
    }

    /// Number of distinct complex roots.
    pub fn distinct_root_count(&self) -> usize {
        self.squarefree_part().degree().unwrap_or(0)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    /// Evaluates `p(A)` by Horner's scheme.
    pub fn eval_matrix(&self, a: &RatMatrix) -> Result<RatMatrix> {
        let n = a.rows();
        let mut acc = RatMatrix::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            acc = acc.try_mul(a)?.try_add(&RatMatrix::identity(n).scale(c))?;
        }
        Ok(acc)
    }

    /// Companion matrix of the monic associate; its characteristic polynomial is `self.monic()`.
    pub fn companion(&self) -> RatMatrix {
        let p = self.monic();
        let n = p.degree().unwrap_or(0);
        let mut c = RatMatrix::zeros(n, n);
        for i in 1..n {
            c[(i, i - 1)] = Rational::one();
        }
        for i in 0..n {
            c[(i, n - 1)] = -p.coeff(i);
        }
        c
    }

    /// Monic polynomial whose roots are the `k`-th powers of the roots of `self`
    /// (with multiplicity), i.e. the resultant `Res_x(p(x), s - x^k)` for monic `p`.
    ///
    /// Computed as the characteristic polynomial of the `k`-th power of the companion matrix.
    pub fn root_power_poly(&self, k: u32) -> RatPoly {
        let c = self.companion();
        let ck = c.pow(k).expect("companion matrix is square");
        char_poly(&ck).expect("square")
    }
}

/// Resultant of two polynomials over the rationals, by the Euclidean remainder sequence.
pub fn resultant(a: &RatPoly, b: &RatPoly) -> Rational {
    let (Some(m), Some(n)) = (a.degree(), b.degree()) else {
        return Rational::zero();
    };
    if n == 0 {
        return num_traits::pow(b.leading(), m);
    }
    if m == 0 {
        return num_traits::pow(a.leading(), n);
    }
    let sign = if (m * n) % 2 == 1 {
        -Rational::one()
    } else {
        Rational::one()
    };
    if m < n {
        return sign * resultant(b, a);
    }
    let r = a.div_rem(b).1;
    let Some(dr) = r.degree() else {
        return Rational::zero();
    };
    sign * num_traits::pow(b.leading(), m - dr) * resultant(b, &r)
}

/// Characteristic polynomial `det(sI - F)` (monic, degree n), by the
/// Faddeev-LeVerrier recursion.
pub fn char_poly(f: &RatMatrix) -> Result<RatPoly> {
    if !f.is_square() {
        return crate::error::dim_err("characteristic polynomial of a non-square matrix");
    }
    let n = f.rows();
    let mut coeffs = vec![Rational::zero(); n + 1];
    coeffs[n] = Rational::one();
    let mut m = RatMatrix::zeros(n, n);
    for k in 1..=n {
        m = f
            .try_mul(&m)?
            .try_add(&RatMatrix::identity(n).scale(&coeffs[n - k + 1]))?;
        let am = f.try_mul(&m)?;
        coeffs[n - k] = -am.trace() / int(k as i64);
    }
    Ok(RatPoly::new(coeffs))
}

impl fmt::Debug for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatPoly({self})")
    }
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format_rational(c),
                1 => format!("{}*s", format_rational(c)),
                _ => format!("{}*s^{i}", format_rational(c)),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}
