use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{dim_err, Error, Result};
use crate::ratmath::{round_half_away, RatMatrix, Rational};

/// Component-wise `round(v / step)`, ties away from zero.
pub fn quantize(v: &[Rational], step: &Rational) -> Vec<BigInt> {
    v.iter().map(|x| round_half_away(&(x / step))).collect()
}

/// Dense integer matrix, the plaintext form of a controller matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    /// Fails with `NonIntegerPlaintext` if any entry is not an integer.
    pub fn from_exact(m: &RatMatrix, name: &str) -> Result<Self> {
        if !m.is_integer() {
            return Err(Error::NonIntegerPlaintext(name.to_string()));
        }
        Ok(Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.entries().iter().map(|v| v.to_integer()).collect(),
        })
    }

    /// `round(m / divisor)`; when `m / divisor` is already integral no
    /// rounding happens and the second value is `false`.
    pub fn scaled(m: &RatMatrix, divisor: &Rational) -> (Self, bool) {
        let q = m.scale(&divisor.recip());
        let exact = q.is_integer();
        let data = q.entries().iter().map(round_half_away).collect();
        (
            Self {
                rows: m.rows(),
                cols: m.cols(),
                data,
            },
            !exact,
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.data
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|v| v.is_zero() || v.is_one())
    }

    pub fn to_rational(&self) -> RatMatrix {
        RatMatrix::new(
            self.rows,
            self.cols,
            self.data
                .iter()
                .cloned()
                .map(Rational::from_integer)
                .collect(),
        )
        .expect("shape preserved")
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Result<Vec<BigInt>> {
        if v.len() != self.cols {
            return dim_err(format!(
                "{}x{} integer matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            ));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Like `mul_vec`, also raising `peak` to the largest magnitude of any
    /// scalar product or partial sum formed along the way.
    pub fn mul_vec_tracked(&self, v: &[BigInt], peak: &mut BigInt) -> Result<Vec<BigInt>> {
        if v.len() != self.cols {
            return self.mul_vec(v);
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = BigInt::zero();
            for (a, b) in self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v) {
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                let prod = a * b;
                raise(peak, &prod);
                acc += prod;
                raise(peak, &acc);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `[a | b | ...]`; every part must have the same row count.
    pub fn hstack(parts: &[&IntMatrix]) -> Result<IntMatrix> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if parts.iter().any(|p| p.rows != rows) {
            return dim_err("hstack: row counts differ");
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(&p.data[i * p.cols..(i + 1) * p.cols]);
            }
        }
        Ok(Self { rows, cols, data })
    }
}

pub(crate) fn raise(peak: &mut BigInt, v: &BigInt) {
    if v.magnitude() > peak.magnitude() {
        *peak = v.abs();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmath::{frac, int};

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(&[frac(1, 2)], &int(1)), vec![BigInt::from(1)]);
        assert_eq!(quantize(&[frac(-1, 2)], &int(1)), vec![BigInt::from(-1)]);
        assert_eq!(
            quantize(&[frac(3, 2), frac(-7, 3)], &frac(1, 10)),
            vec![BigInt::from(15), BigInt::from(-23)]
        );
    }

    #[test]
    fn scaled_detects_exact_case() {
        let m = RatMatrix::new(1, 2, vec![frac(1, 4), frac(-3, 2)]).unwrap();
        let (q, rounded) = IntMatrix::scaled(&m, &frac(1, 4));
        assert!(!rounded);
        assert_eq!(q.entries(), &[BigInt::from(1), BigInt::from(-6)]);
        let (q, rounded) = IntMatrix::scaled(&m, &frac(1, 2));
        assert!(rounded);
        assert_eq!(q.entries(), &[BigInt::from(1), BigInt::from(-3)]);
    }

    #[test]
    fn non_integer_plaintext() {
        let m = RatMatrix::new(1, 1, vec![frac(1, 2)]).unwrap();
        assert_eq!(
            IntMatrix::from_exact(&m, "F"),
            Err(Error::NonIntegerPlaintext("F".into()))
        );
    }

    #[test]
    fn tracked_product_peaks() {
        let m = IntMatrix::from_exact(&RatMatrix::from_i64(1, 2, &[3, -2]), "m").unwrap();
        let mut peak = BigInt::zero();
        let out = m
            .mul_vec_tracked(&[BigInt::from(4), BigInt::from(5)], &mut peak)
            .unwrap();
        assert_eq!(out, vec![BigInt::from(2)]);
        assert_eq!(peak, BigInt::from(12));
    }
}
