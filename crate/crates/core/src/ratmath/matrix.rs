//! Dense matrices over the rationals.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::rational::{format_rational, int, is_integer, rational_from_json, to_f64, Rational};
use crate::error::{dim_err, Error, Result};

/// Dense row-major matrix of exact rationals.
///
/// Matrices with zero rows or zero columns are ordinary values; they show up
/// whenever a basis block turns out to be empty.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rational>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major integer constructor. Panics if `data.len() != rows * cols`.
    pub fn from_i64(rows: usize, cols: usize, data: &[i64]) -> Self {
        assert_eq!(data.len(), rows * cols, "from_i64: wrong entry count");
        Self {
            rows,
            cols,
            data: data.iter().map(|&v| int(v)).collect(),
        }
    }

    /// Builds a matrix from rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return dim_err("ragged rows");
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn column_vector(values: Vec<Rational>) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn diag(values: &[Rational]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                values[i].clone()
            } else {
                Rational::zero()
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Rational] {
        &self.data
    }

    pub fn into_entries(self) -> Vec<Rational> {
        self.data
    }

    pub fn row_slice(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> RatMatrix {
        self.select_columns(&[j])
    }

    /// Column `j` as an owned vector.
    pub fn column_values(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> RatMatrix {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])].clone())
    }

    pub fn select_rows(&self, idx: &[usize]) -> RatMatrix {
        Self::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)].clone())
    }

    /// The `nrows x ncols` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> RatMatrix {
        assert!(
            r0 + nrows <= self.rows && c0 + ncols <= self.cols,
            "block out of range"
        );
        Self::from_fn(nrows, ncols, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    pub fn columns_range(&self, start: usize, end: usize) -> RatMatrix {
        self.block(0, start, self.rows, end - start)
    }

    pub fn rows_range(&self, start: usize, end: usize) -> RatMatrix {
        self.block(start, 0, end - start, self.cols)
    }

    pub fn transpose(&self) -> RatMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn try_add(&self, other: &RatMatrix) -> Result<RatMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, other: &RatMatrix) -> Result<RatMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &RatMatrix,
        what: &str,
        f: impl Fn(&Rational, &Rational) -> Rational,
    ) -> Result<RatMatrix> {
        if self.shape() != other.shape() {
            return dim_err(format!("{what}: {:?} vs {:?}", self.shape(), other.shape()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn try_mul(&self, other: &RatMatrix) -> Result<RatMatrix> {
        if self.cols != other.rows {
            return dim_err(format!("mul: {:?} times {:?}", self.shape(), other.shape()));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(l, j)];
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix times a plain vector.
    pub fn mul_vec(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        if self.cols != v.len() {
            return dim_err(format!(
                "mul_vec: {:?} times length {}",
                self.shape(),
                v.len()
            ));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row_slice(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn scale(&self, c: &Rational) -> RatMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `[a, b, ...]` side by side. All parts must share the row count.
    pub fn hstack(parts: &[&RatMatrix]) -> Result<RatMatrix> {
        let Some(first) = parts.first() else {
            return Ok(Self::zeros(0, 0));
        };
        let rows = first.rows;
        if parts.iter().any(|p| p.rows != rows) {
            return dim_err("hstack: row counts differ");
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row_slice(i));
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// `[a; b; ...]` stacked vertically. All parts must share the column count.
    pub fn vstack(parts: &[&RatMatrix]) -> Result<RatMatrix> {
        let Some(first) = parts.first() else {
            return Ok(Self::zeros(0, 0));
        };
        let cols = first.cols;
        if parts.iter().any(|p| p.cols != cols) {
            return dim_err("vstack: column counts differ");
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self { rows, cols, data })
    }

    /// Block-diagonal matrix `diag(a, b)`.
    pub fn block_diag(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
        let mut out = Self::zeros(a.rows + b.rows, a.cols + b.cols);
        out.set_block(0, 0, a);
        out.set_block(a.rows, a.cols, b);
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, m: &RatMatrix) {
        assert!(
            r0 + m.rows <= self.rows && c0 + m.cols <= self.cols,
            "set_block out of range"
        );
        for i in 0..m.rows {
            for j in 0..m.cols {
                self[(r0 + i, c0 + j)] = m[(i, j)].clone();
            }
        }
    }

    pub fn pow(&self, exp: u32) -> Result<RatMatrix> {
        if !self.is_square() {
            return dim_err("power of a non-square matrix");
        }
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                result = result.try_mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.try_mul(&base)?;
            }
        }
        Ok(result)
    }

    pub fn trace(&self) -> Rational {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)].clone())
            .sum()
    }

    /// Reduced row echelon form and the pivot columns.
    ///
    /// The pivot in each column is the first nonzero entry at or below the
    /// current row, so the result is a deterministic function of the input.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            m.swap_rows(p, row);
            let inv = m[(row, col)].recip();
            for j in col..m.cols {
                let v = &m[(row, j)] * &inv;
                m[(row, j)] = v;
            }
            for r in 0..m.rows {
                if r == row || m[(r, col)].is_zero() {
                    continue;
                }
                let factor = m[(r, col)].clone();
                for j in col..m.cols {
                    if m[(row, j)].is_zero() {
                        continue;
                    }
                    let delta = &factor * &m[(row, j)];
                    m[(r, j)] -= delta;
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right null space, one column per free variable.
    ///
    /// Each column is sign-normalized so that its first nonzero entry is positive.
    pub fn kernel_basis(&self) -> RatMatrix {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = Self::zeros(self.cols, free.len());
        for (k, &f) in free.iter().enumerate() {
            out[(f, k)] = Rational::one();
            for (i, &p) in pivots.iter().enumerate() {
                out[(p, k)] = -r[(i, f)].clone();
            }
            let first = (0..self.cols).map(|i| &out[(i, k)]).find(|v| !v.is_zero());
            if first.is_some_and(|v| v.is_negative()) {
                for i in 0..self.cols {
                    let v = -out[(i, k)].clone();
                    out[(i, k)] = v;
                }
            }
        }
        out
    }

    /// Linearly independent columns of `self`, chosen in pivot order.
    pub fn column_basis(&self) -> RatMatrix {
        let (_, pivots) = self.rref();
        self.select_columns(&pivots)
    }

    /// Extends the independent columns of `base` with columns taken from
    /// `candidates` (in order) until the span of `candidates` is covered.
    /// Returns only the added columns.
    pub fn complete_with(base: &RatMatrix, candidates: &RatMatrix) -> Result<RatMatrix> {
        let stacked = Self::hstack(&[base, candidates])?;
        let (_, pivots) = stacked.rref();
        let chosen: Vec<usize> = pivots
            .into_iter()
            .filter(|&p| p >= base.cols)
            .map(|p| p - base.cols)
            .collect();
        Ok(candidates.select_columns(&chosen))
    }

    /// True when every column of `other` lies in the column span of `self`.
    pub fn span_contains(&self, other: &RatMatrix) -> bool {
        if other.cols == 0 {
            return true;
        }
        match Self::hstack(&[self, other]) {
            Ok(s) => s.rank() == self.rank(),
            Err(_) => false,
        }
    }

    /// Exact inverse via Gauss-Jordan elimination on `[A | I]`.
    pub fn inverse(&self) -> Result<RatMatrix> {
        if !self.is_square() {
            return dim_err(format!("inverse of a {:?} matrix", self.shape()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Self::zeros(0, 0));
        }
        let aug = Self::hstack(&[self, &Self::identity(n)])?;
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::SingularMatrix);
        }
        Ok(r.block(0, n, n, n))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_integer(&self) -> bool {
        self.data.iter().all(is_integer)
    }

    /// Every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|v| v.is_zero() || v.is_one())
    }

    pub fn max_abs(&self) -> Rational {
        self.data
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row_slice(i).iter().map(to_f64).collect())
            .collect()
    }
}

impl Index<(usize, usize)> for RatMatrix {
    type Output = Rational;

    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of range"
        );
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of range"
        );
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; use the `try_*` methods for fallible code.

impl Mul for &RatMatrix {
    type Output = RatMatrix;

    fn mul(self, rhs: &RatMatrix) -> RatMatrix {
        self.try_mul(rhs).expect("matrix product")
    }
}

impl Add for &RatMatrix {
    type Output = RatMatrix;

    fn add(self, rhs: &RatMatrix) -> RatMatrix {
        self.try_add(rhs).expect("matrix sum")
    }
}

impl Sub for &RatMatrix {
    type Output = RatMatrix;

    fn sub(self, rhs: &RatMatrix) -> RatMatrix {
        self.try_sub(rhs).expect("matrix difference")
    }
}

impl Neg for &RatMatrix {
    type Output = RatMatrix;

    fn neg(self) -> RatMatrix {
        self.scale(&-Rational::one())
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatMatrix{}x{}{}", self.rows, self.cols, self)
    }
}

impl fmt::Display for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row_slice(i).iter().map(format_rational).collect();
            write!(f, "{}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl Serialize for RatMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| self.row_slice(i).iter().map(format_rational).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RatMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        matrix_from_json(&v).map_err(de::Error::custom)
    }
}

/// Parses a nested JSON array of rational strings or integers.
pub fn matrix_from_json(v: &serde_json::Value) -> Result<RatMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
    let parsed = rows
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| Error::Parse("matrix row must be an array".into()))?
                .iter()
                .map(rational_from_json)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    RatMatrix::from_rows(parsed).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmath::rational::frac;

    fn m(rows: usize, cols: usize, d: &[i64]) -> RatMatrix {
        RatMatrix::from_i64(rows, cols, d)
    }

    #[test]
    fn inverse_of_upper_triangular() {
        let a = m(2, 2, &[-1, 1, 0, -1]);
        let inv = a.inverse().unwrap();
        assert_eq!(inv, m(2, 2, &[-1, -1, 0, -1]));
        assert_eq!(&inv * &a, RatMatrix::identity(2));
    }

    #[test]
    fn singular_and_nonsquare_inverse() {
        assert_eq!(m(2, 2, &[1, 2, 2, 4]).inverse(), Err(Error::SingularMatrix));
        assert!(matches!(
            m(1, 2, &[1, 2]).inverse(),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nilpotent_power_and_zero_exponent() {
        let n = m(2, 2, &[0, 1, 0, 0]);
        assert!(n.pow(2).unwrap().is_zero());
        assert_eq!(n.pow(0).unwrap(), RatMatrix::identity(2));
        assert!(m(2, 3, &[0; 6]).pow(1).is_err());
    }

    #[test]
    fn identity_is_neutral() {
        let a = RatMatrix::from_fn(3, 3, |i, j| frac(i as i64 - 2 * j as i64, 1 + j as i64));
        assert_eq!(&RatMatrix::identity(3) * &a, a);
    }

    #[test]
    fn mismatched_product_is_an_error() {
        assert!(m(2, 3, &[0; 6]).try_mul(&m(2, 3, &[0; 6])).is_err());
        assert!(m(2, 3, &[0; 6]).try_add(&m(3, 2, &[0; 6])).is_err());
    }

    #[test]
    fn rref_examples() {
        let (r, p) = m(2, 2, &[2, 4, 1, 2]).rref();
        assert_eq!(r, m(2, 2, &[1, 2, 0, 0]));
        assert_eq!(p, vec![0]);
        let (r, p) = RatMatrix::zeros(2, 3).rref();
        assert!(r.is_zero());
        assert!(p.is_empty());
        let (r, p) = RatMatrix::identity(4).rref();
        assert_eq!(r, RatMatrix::identity(4));
        assert_eq!(p, vec![0, 1, 2, 3]);
    }

    #[test]
    fn kernel_examples() {
        let k = m(1, 2, &[1, 1]).kernel_basis();
        assert_eq!(k, m(2, 1, &[1, -1]));
        assert_eq!(RatMatrix::identity(2).kernel_basis().shape(), (2, 0));
        let k = RatMatrix::zeros(1, 2).kernel_basis();
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k.rank(), 2);
    }

    #[test]
    fn null_matrices_stack() {
        let a = RatMatrix::zeros(3, 0);
        let b = m(3, 1, &[1, 2, 3]);
        let s = RatMatrix::hstack(&[&a, &b, &a]).unwrap();
        assert_eq!(s, b);
        assert_eq!(
            RatMatrix::vstack(&[&RatMatrix::zeros(0, 2), &m(1, 2, &[4, 5])])
                .unwrap()
                .rows(),
            1
        );
        assert_eq!(
            (&RatMatrix::zeros(2, 0) * &RatMatrix::zeros(0, 3)),
            RatMatrix::zeros(2, 3)
        );
    }

    #[test]
    fn completion_picks_pivot_order() {
        let base = m(3, 1, &[1, 1, 0]);
        let added = RatMatrix::complete_with(&base, &RatMatrix::identity(3)).unwrap();
        // e1 completes (1,1,0) to span{e1,e2}; e3 is needed; e2 is redundant
        assert_eq!(added, RatMatrix::identity(3).select_columns(&[0, 2]));
    }

    #[test]
    fn span_containment() {
        let u = m(3, 2, &[1, 0, 0, 1, 0, 0]);
        assert!(u.span_contains(&m(3, 1, &[2, -3, 0])));
        assert!(!u.span_contains(&m(3, 1, &[0, 0, 1])));
        assert!(u.span_contains(&RatMatrix::zeros(3, 0)));
    }

    #[test]
    fn json_round_trip() {
        let a = RatMatrix::from_fn(2, 3, |i, j| frac(i as i64 * 7 - 3, j as i64 + 2));
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"[["-3/2","-1","-3/4"],["2","4/3","1"]]"#);
        let back: RatMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        let ints: RatMatrix = serde_json::from_str("[[1, 2], [\"3/4\", -1]]").unwrap();
        assert_eq!(ints[(1, 0)], frac(3, 4));
    }
}
