//! Controllers whose state is updated every `k` samples, so that the
//! re-encrypted output is needed only at `t = 0, k, 2k, ...`.
//!
//! The lifted state update is `x(t+k) = (F^k - RH) x(t) + G_k Y(t,k) + R u(t)`
//! and the outputs inside a period are `u(t+i) = H F^i x(t) + H G_i Y(t,i)`.

use serde::{Deserialize, Serialize};

use crate::canon::algorithm1;
use crate::error::{dim_err, Error, Result};
use crate::ratmath::{char_poly, RatMatrix};
use crate::sysobs::{is_observable, row_basis, ControllerSpec};

/// Outcome of the period condition: distinct eigenvalues of `F` must stay
/// distinct after raising them to the `k`-th power.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodCheck {
    pub k: u32,
    pub valid: bool,
    pub distinct_root_count: usize,
    pub distinct_power_count: usize,
}

/// Exact period test over the rationals.
///
/// With `rho = det(sI - F)`, the polynomial whose roots are the `k`-th powers of
/// the roots of `rho` is the resultant `Res_x(rho(x), s - x^k)`. The condition
/// holds iff both polynomials have squarefree parts of the same degree.
pub fn check_period(f: &RatMatrix, k: u32) -> Result<PeriodCheck> {
    if !f.is_square() {
        return dim_err("period check needs a square F");
    }
    if k == 0 {
        return Err(Error::InvalidPeriod(0));
    }
    let rho = char_poly(f)?;
    let distinct_root_count = rho.distinct_root_count();
    let distinct_power_count = if k == 1 {
        distinct_root_count
    } else {
        rho.root_power_poly(k).distinct_root_count()
    };
    Ok(PeriodCheck {
        k,
        valid: distinct_root_count == distinct_power_count,
        distinct_root_count,
        distinct_power_count,
    })
}

/// Smallest `k >= k_min` passing [`check_period`].
///
/// Terminates: a collision needs a root of unity of order `l >= 2` as the
/// ratio of two eigenvalues, and only finitely many such `l` occur.
pub fn suggest_period(f: &RatMatrix, k_min: u32) -> Result<u32> {
    let mut k = k_min.max(1);
    loop {
        if check_period(f, k)?.valid {
            return Ok(k);
        }
        k += 1;
    }
}

/// `T0 F T0^-1 = diag(F1, F2)` with `F1` nilpotent and `F2` invertible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NilpotentSplit {
    pub t0: RatMatrix,
    pub t0_inv: RatMatrix,
    /// Dimension of the zero-eigenvalue part.
    pub n0: usize,
    pub f1: RatMatrix,
    pub f2: RatMatrix,
    pub h1: RatMatrix,
    pub h2: RatMatrix,
}

/// Splits `R^n = ker(F^n) + im(F^n)`; both are `F`-invariant, `F` is
/// nilpotent on the first and invertible on the second.
pub fn split_nilpotent(f: &RatMatrix, h: &RatMatrix) -> Result<NilpotentSplit> {
    if !f.is_square() || h.cols() != f.rows() {
        return dim_err("split_nilpotent: F must be square and H conformable");
    }
    let n = f.rows();
    let fn_pow = f.pow(n as u32)?;
    let ker = fn_pow.kernel_basis();
    let im = fn_pow.column_basis();
    let n0 = ker.cols();
    let t0_inv = RatMatrix::hstack(&[&ker, &im])?;
    let t0 = t0_inv.inverse()?;
    let fb = t0.try_mul(f)?.try_mul(&t0_inv)?;
    let hb = h.try_mul(&t0_inv)?;
    Ok(NilpotentSplit {
        f1: fb.block(0, 0, n0, n0),
        f2: fb.block(n0, n0, n - n0, n - n0),
        h1: hb.columns_range(0, n0),
        h2: hb.columns_range(n0, n),
        t0,
        t0_inv,
        n0,
    })
}

/// Output injection `R2` with `F2k - R2 H2` nilpotent.
///
/// `H2` is first reduced to a row basis `H2' = S H2`; the observer gain of
/// the conversion construction applied to `(F2k, H2')` is nilpotent-making,
/// and `R2 = R2' S` gives the same closed-loop matrix.
pub fn deadbeat_gain(f2k: &RatMatrix, h2: &RatMatrix) -> Result<RatMatrix> {
    if !f2k.is_square() || h2.cols() != f2k.rows() {
        return dim_err("deadbeat_gain: F must be square and H conformable");
    }
    let d = f2k.rows();
    if d == 0 {
        return Ok(RatMatrix::zeros(0, h2.rows()));
    }
    let sel = row_basis(h2);
    if sel.rows.is_empty() {
        return Err(Error::NotObservable);
    }
    let a1 = algorithm1(f2k, &sel.reduced)?;
    let w_n = a1.w_last();
    let hw_inv = sel.reduced.try_mul(w_n)?.inverse()?;
    let r_sel = f2k.try_mul(w_n)?.try_mul(&hw_inv)?;
    r_sel.try_mul(&sel.selection)
}

/// Jordan form of a nilpotent matrix: `T1 N T1^-1 = J`, with `J`
/// block diagonal and each block a `{0,1}` upper shift.
///
/// Built from the kernel chain `ker N ⊆ ker N^2 ⊆ ...`: at each level from
/// the top, images of longer chains are kept and completed with new chain
/// generators taken from the kernel basis in pivot order.
pub fn nilpotent_canonical(nil: &RatMatrix) -> Result<(RatMatrix, RatMatrix)> {
    if !nil.is_square() {
        return dim_err("nilpotent_canonical needs a square matrix");
    }
    let n = nil.rows();
    if !nil.pow(n as u32)?.is_zero() {
        return Err(Error::NotNilpotent);
    }
    let mut kernels = vec![RatMatrix::zeros(n, 0)];
    let mut power = RatMatrix::identity(n);
    while kernels.last().map_or(0, RatMatrix::cols) < n {
        power = power.try_mul(nil)?;
        kernels.push(power.kernel_basis());
    }
    let index = kernels.len() - 1;

    let mut chains: Vec<(RatMatrix, usize)> = Vec::new();
    let mut carried = RatMatrix::zeros(n, 0);
    for level in (1..=index).rev() {
        let base = RatMatrix::hstack(&[&kernels[level - 1], &carried])?;
        let fresh = RatMatrix::complete_with(&base, &kernels[level])?;
        for j in 0..fresh.cols() {
            chains.push((fresh.column(j), level));
        }
        let at_level = RatMatrix::hstack(&[&carried, &fresh])?;
        carried = nil.try_mul(&at_level)?;
    }

    let mut columns = Vec::with_capacity(n);
    let mut j = RatMatrix::zeros(n, n);
    let mut offset = 0;
    for (gen, len) in &chains {
        let mut chain = vec![gen.clone()];
        for _ in 1..*len {
            let next = nil.try_mul(chain.last().expect("nonempty"))?;
            chain.push(next);
        }
        chain.reverse();
        columns.extend(chain);
        for i in 1..*len {
            j[(offset + i - 1, offset + i)] = num_traits::One::one();
        }
        offset += len;
    }
    let p = RatMatrix::hstack(&columns.iter().collect::<Vec<_>>())?;
    let p = if n == 0 { RatMatrix::zeros(0, 0) } else { p };
    Ok((p.inverse()?, j))
}

/// `G_i = [F^(i-1) G, ..., F G, G]` (`n x ip`; no columns for `i = 0`).
pub fn lifted_input_matrix(f: &RatMatrix, g: &RatMatrix, i: usize) -> Result<RatMatrix> {
    let mut blocks = Vec::with_capacity(i);
    let mut cur = g.clone();
    for _ in 0..i {
        let next = f.try_mul(&cur)?;
        blocks.push(cur);
        cur = next;
    }
    if blocks.is_empty() {
        return Ok(RatMatrix::zeros(g.rows(), 0));
    }
    blocks.reverse();
    RatMatrix::hstack(&blocks.iter().collect::<Vec<_>>())
}

/// Lifted controller in transformed coordinates `z = T x`:
/// `z(t+k) = A_bar z(t) + B_Y Y(t,k) + B_u u(t)` and
/// `u(t+i) = out_state[i] z(t) + out_input[i] Y(t,i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "intermittent")]
pub struct IntermittentResult {
    pub k: u32,
    #[serde(rename = "T")]
    pub t: RatMatrix,
    #[serde(rename = "T_inv")]
    pub t_inv: RatMatrix,
    #[serde(rename = "R")]
    pub r: RatMatrix,
    /// `T(F^k - RH)T^-1`.
    #[serde(rename = "A_bar")]
    pub a_bar: RatMatrix,
    /// `T G_k`.
    #[serde(rename = "B_Y")]
    pub b_y: RatMatrix,
    /// `TR`.
    #[serde(rename = "B_u")]
    pub b_u: RatMatrix,
    /// `H F^i T^-1`, `i = 0..k`.
    pub out_state: Vec<RatMatrix>,
    /// `H G_i`, `i = 0..k`; the first entry has no columns.
    pub out_input: Vec<RatMatrix>,
}

impl IntermittentResult {
    pub fn n(&self) -> usize {
        self.a_bar.rows()
    }

    pub fn m(&self) -> usize {
        self.b_u.cols()
    }

    pub fn p(&self) -> usize {
        self.b_y.cols() / self.k as usize
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("intermittent result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Assembles the period-`k` construction: `R = T0^-1 [0; R2]`, `T = T1 T0`.
pub fn build_intermittent(spec: &ControllerSpec, k: u32) -> Result<IntermittentResult> {
    let (f, g, h) = (spec.f(), spec.g(), spec.h());
    if !check_period(f, k)?.valid {
        return Err(Error::InvalidPeriod(k));
    }
    if !is_observable(f, h)? {
        return Err(Error::NotObservable);
    }
    let n = spec.n();
    let m = spec.m();
    let split = split_nilpotent(f, h)?;
    let f2k = split.f2.pow(k)?;
    let r2 = deadbeat_gain(&f2k, &split.h2)?;
    let stacked = RatMatrix::vstack(&[&RatMatrix::zeros(split.n0, m), &r2])?;
    let r = split.t0_inv.try_mul(&stacked)?;

    let fk = f.pow(k)?;
    let closed = fk.try_sub(&r.try_mul(h)?)?;
    let f_conv = split.t0.try_mul(&closed)?.try_mul(&split.t0_inv)?;
    let (t1, _) = nilpotent_canonical(&f_conv)?;
    let t = t1.try_mul(&split.t0)?;
    let t_inv = t.inverse()?;
    let a_bar = t.try_mul(&closed)?.try_mul(&t_inv)?;

    let g_k = lifted_input_matrix(f, g, k as usize)?;
    let mut out_state = Vec::with_capacity(k as usize);
    let mut out_input = Vec::with_capacity(k as usize);
    let mut hf = h.clone();
    for i in 0..k as usize {
        out_state.push(hf.try_mul(&t_inv)?);
        out_input.push(h.try_mul(&lifted_input_matrix(f, g, i)?)?);
        hf = hf.try_mul(f)?;
    }
    debug_assert_eq!(a_bar.rows(), n);
    Ok(IntermittentResult {
        k,
        b_y: t.try_mul(&g_k)?,
        b_u: t.try_mul(&r)?,
        t,
        t_inv,
        r,
        a_bar,
        out_state,
        out_input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmath::{frac, int, RatPoly};

    fn m(r: usize, c: usize, d: &[i64]) -> RatMatrix {
        RatMatrix::from_i64(r, c, d)
    }

    #[test]
    fn period_examples() {
        let sign = m(2, 2, &[-1, 0, 0, 1]);
        let c = check_period(&sign, 2).unwrap();
        assert!(!c.valid);
        assert_eq!((c.distinct_root_count, c.distinct_power_count), (2, 1));
        assert!(check_period(&sign, 3).unwrap().valid);
        assert!(check_period(&m(2, 2, &[0, 1, 0, 0]), 2).unwrap().valid);
        assert!(check_period(&sign, 1).unwrap().valid);
    }

    #[test]
    fn suggested_periods() {
        let sign = m(2, 2, &[-1, 0, 0, 1]);
        assert_eq!(suggest_period(&sign, 2).unwrap(), 3);
        assert_eq!(suggest_period(&m(2, 2, &[0, 1, 0, 0]), 5).unwrap(), 5);
        assert_eq!(suggest_period(&RatMatrix::identity(3), 2).unwrap(), 2);
        // rotation by 90 degrees: eigenvalues +-i collide at every even k
        let rot = m(2, 2, &[0, -1, 1, 0]);
        assert_eq!(suggest_period(&rot, 2).unwrap(), 3);
        assert!(!check_period(&rot, 4).unwrap().valid);
    }

    #[test]
    fn split_examples() {
        let f = m(3, 3, &[0, 1, 0, 0, 0, 0, 0, 0, 2]);
        let h = m(1, 3, &[1, 1, 1]);
        let s = split_nilpotent(&f, &h).unwrap();
        assert_eq!(s.n0, 2);
        assert_eq!(s.f1, m(2, 2, &[0, 1, 0, 0]));
        assert_eq!(s.f2.shape(), (1, 1));
        assert_eq!(s.f2[(0, 0)], int(2));
        let back = &(&s.t0 * &f) * &s.t0_inv;
        assert_eq!(back, RatMatrix::block_diag(&s.f1, &s.f2));

        let nil = split_nilpotent(&m(2, 2, &[0, 1, 0, 0]), &m(1, 2, &[1, 0])).unwrap();
        assert_eq!((nil.n0, nil.f2.shape()), (2, (0, 0)));
        let inv = split_nilpotent(&m(2, 2, &[1, 1, 0, 1]), &m(1, 2, &[1, 0])).unwrap();
        assert_eq!((inv.n0, inv.f1.shape()), (0, (0, 0)));
    }

    #[test]
    fn deadbeat_examples() {
        assert_eq!(
            deadbeat_gain(&m(1, 1, &[8]), &m(1, 1, &[1])).unwrap(),
            m(1, 1, &[8])
        );
        let r = deadbeat_gain(&m(2, 2, &[1, 0, 0, 4]), &m(1, 2, &[1, 1])).unwrap();
        assert_eq!(r, RatMatrix::column_vector(vec![frac(-1, 3), frac(16, 3)]));
        let f = m(2, 2, &[1, 1, 0, 1]);
        let h = m(1, 2, &[1, 0]);
        let r = deadbeat_gain(&f, &h).unwrap();
        let cp = char_poly(&(&f - &(&r * &h))).unwrap();
        assert_eq!(cp, RatPoly::from_i64(&[0, 0, 1]));
        assert_eq!(
            deadbeat_gain(&RatMatrix::identity(2), &m(1, 2, &[1, 1])),
            Err(Error::NotObservable)
        );
    }

    #[test]
    fn deadbeat_with_redundant_rows() {
        let f = m(2, 2, &[2, 1, 0, 3]);
        let h = m(2, 2, &[1, 1, 2, 2]);
        let r = deadbeat_gain(&f, &h).unwrap();
        let cp = char_poly(&(&f - &(&r * &h))).unwrap();
        assert_eq!(cp, RatPoly::from_i64(&[0, 0, 1]));
    }

    #[test]
    fn nilpotent_canonical_examples() {
        let (t1, j) = nilpotent_canonical(&RatMatrix::zeros(3, 3)).unwrap();
        assert_eq!(t1, RatMatrix::identity(3));
        assert!(j.is_zero());

        let nil = m(2, 2, &[0, 2, 0, 0]);
        let (t1, j) = nilpotent_canonical(&nil).unwrap();
        assert_eq!(j, m(2, 2, &[0, 1, 0, 0]));
        assert_eq!(&(&t1 * &nil) * &t1.inverse().unwrap(), j);

        // one 2-block and one 1-block
        let nil = m(3, 3, &[0, 0, 1, 0, 0, 0, 0, 0, 0]);
        let (t1, j) = nilpotent_canonical(&nil).unwrap();
        assert_eq!(&(&t1 * &nil) * &t1.inverse().unwrap(), j);
        let ones = j.entries().iter().filter(|v| *v == &int(1)).count();
        assert_eq!(ones, 3 - nil.kernel_basis().cols());

        assert_eq!(
            nilpotent_canonical(&RatMatrix::identity(2)),
            Err(Error::NotNilpotent)
        );
    }

    #[test]
    fn lifted_inputs() {
        let f = m(2, 2, &[0, 1, 0, 0]);
        let g = m(2, 1, &[0, 1]);
        assert_eq!(lifted_input_matrix(&f, &g, 0).unwrap().shape(), (2, 0));
        assert_eq!(
            lifted_input_matrix(&f, &g, 2).unwrap(),
            RatMatrix::identity(2)
        );
    }

    #[test]
    fn shift_controller_period_two() {
        let spec = ControllerSpec::new(
            m(2, 2, &[0, 1, 0, 0]),
            m(2, 1, &[0, 1]),
            m(1, 2, &[1, 1]),
            RatMatrix::zeros(2, 1),
        )
        .unwrap();
        let ir = build_intermittent(&spec, 2).unwrap();
        assert!(ir.r.is_zero());
        assert!(ir.a_bar.is_zero());
        assert_eq!(&ir.t * &ir.t_inv, RatMatrix::identity(2));
        assert_eq!(ir.out_state[0], spec.h() * &ir.t_inv);
        assert_eq!(ir.out_state[1], &(spec.h() * spec.f()) * &ir.t_inv);
        assert_eq!(ir.out_input[0].shape(), (1, 0));
        assert_eq!(ir.out_input[1], m(1, 1, &[1]));
    }

    #[test]
    fn scalar_controller_period_three() {
        let a = frac(1, 2);
        let spec = ControllerSpec::new(
            RatMatrix::column_vector(vec![a.clone()]),
            m(1, 1, &[1]),
            m(1, 1, &[1]),
            RatMatrix::zeros(1, 1),
        )
        .unwrap();
        let ir = build_intermittent(&spec, 3).unwrap();
        let a3 = &a * &a * &a;
        assert_eq!(ir.r, RatMatrix::column_vector(vec![a3]));
        assert!(ir.a_bar.is_zero());
        let g3 = RatMatrix::from_rows(vec![vec![&a * &a, a.clone(), int(1)]]).unwrap();
        assert_eq!(ir.b_y, &ir.t * &g3);
        for i in 0..3 {
            let expect = ir.t_inv.scale(&num_traits::pow(a.clone(), i));
            assert_eq!(ir.out_state[i], expect);
        }
    }

    #[test]
    fn invalid_period_is_rejected() {
        let spec = ControllerSpec::new(
            m(2, 2, &[-1, 0, 0, 1]),
            m(2, 1, &[1, 0]),
            m(1, 2, &[1, 1]),
            RatMatrix::zeros(2, 1),
        )
        .unwrap();
        assert_eq!(build_intermittent(&spec, 2), Err(Error::InvalidPeriod(2)));
        let ir = build_intermittent(&spec, 3).unwrap();
        assert!(ir.a_bar.is_binary());
        assert!(ir.a_bar.pow(2).unwrap().is_zero());
    }

    #[test]
    fn json_round_trip() {
        let spec = ControllerSpec::new(
            m(2, 2, &[0, 1, 0, 0]),
            m(2, 1, &[0, 1]),
            m(1, 2, &[1, 1]),
            RatMatrix::zeros(2, 1),
        )
        .unwrap();
        let ir = build_intermittent(&spec, 2).unwrap();
        assert_eq!(IntermittentResult::from_json(&ir.to_json()).unwrap(), ir);
    }
}
