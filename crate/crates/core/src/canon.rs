//! Construction of the transformation `T`, output injection `R` and output
//! scaling `T_u` that turn `T(F - RH)T^-1` and `T_u H T^-1` into `{0,1}` matrices.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::ratmath::RatMatrix;
use crate::sysobs::{observability_stack, unobs_chain, ControllerSpec};

/// Result of the basis construction: `T^-1 = [W_n, W_(n-1), ..., W_1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algorithm1Output {
    pub t: RatMatrix,
    pub t_inv: RatMatrix,
    /// `W_1, ..., W_n`; `W_i` is `n x k_i` and may have no columns.
    pub w_blocks: Vec<RatMatrix>,
    /// `k_1, ..., k_n`.
    pub block_sizes: Vec<usize>,
}

impl Algorithm1Output {
    /// `W_n`, the block whose image under `H` is invertible.
    pub fn w_last(&self) -> &RatMatrix {
        self.w_blocks.last().expect("n >= 1")
    }
}

/// Builds `T` from the unobservability chain of `(F, H)`.
///
/// `W_1` spans `U_(n-1)`. For `i = 2..=n`, `W_i = [F W_(i-1), V_i]` where
/// `V_i` completes `[W_1, ..., W_(i-1), F W_(i-1)]` to a basis of `U_(n-i)`
/// using the kernel basis of `U_(n-i)` in pivot order. `V_i` has no columns
/// when nothing is missing.
pub fn algorithm1(f: &RatMatrix, h: &RatMatrix) -> Result<Algorithm1Output> {
    let chain = unobs_chain(f, h)?;
    let n = f.rows();
    if n == 0 {
        return dim_err("empty state");
    }
    if h.rank() < h.rows() {
        return Err(Error::NotFullRowRank);
    }
    if chain.dim(n) != 0 {
        return Err(Error::NotObservable);
    }
    let mut w_blocks: Vec<RatMatrix> = Vec::with_capacity(n);
    w_blocks.push(chain.u(n - 1).clone());
    for i in 2..=n {
        let fw = f.try_mul(&w_blocks[i - 2])?;
        let mut parts: Vec<&RatMatrix> = w_blocks.iter().collect();
        parts.push(&fw);
        let current = RatMatrix::hstack(&parts)?;
        let v = RatMatrix::complete_with(&current, chain.u(n - i))?;
        w_blocks.push(RatMatrix::hstack(&[&fw, &v])?);
    }
    let block_sizes: Vec<usize> = w_blocks.iter().map(RatMatrix::cols).collect();
    let ordered: Vec<&RatMatrix> = w_blocks.iter().rev().collect();
    let t_inv = RatMatrix::hstack(&ordered)?;
    let t = t_inv.inverse()?;
    Ok(Algorithm1Output {
        t,
        t_inv,
        w_blocks,
        block_sizes,
    })
}

/// One instance of the basis predicate checked after each iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisPredicate {
    /// Iteration index `i` (2..=n).
    pub iteration: usize,
    /// Columns of `[W_1, ..., W_(i-1), F W_(i-1)]` are linearly independent.
    pub independent: bool,
    /// Every such column is annihilated by `[H; HF; ...; HF^(n-i-1)]`, i.e. lies in `U_(n-i)`.
    pub in_subspace: bool,
}

impl BasisPredicate {
    pub fn holds(&self) -> bool {
        self.independent && self.in_subspace
    }
}

/// Re-checks, from the output blocks alone, that each candidate set
/// `[W_1, ..., W_(i-1), F W_(i-1)]` consists of independent vectors in `U_(n-i)`.
///
/// Membership is tested against the stacked observability rows directly, not
/// against the kernel bases used during construction.
pub fn basis_predicates(
    f: &RatMatrix,
    h: &RatMatrix,
    out: &Algorithm1Output,
) -> Result<Vec<BasisPredicate>> {
    let n = f.rows();
    let mut checks = Vec::with_capacity(n.saturating_sub(1));
    for i in 2..=n {
        let fw = f.try_mul(&out.w_blocks[i - 2])?;
        let mut parts: Vec<&RatMatrix> = out.w_blocks[..i - 1].iter().collect();
        parts.push(&fw);
        let cand = RatMatrix::hstack(&parts)?;
        let stack = observability_stack(f, h, n - i)?;
        checks.push(BasisPredicate {
            iteration: i,
            independent: cand.rank() == cand.cols(),
            in_subspace: stack.try_mul(&cand)?.is_zero(),
        });
    }
    Ok(checks)
}

/// Converted controller: `z(t+1) = A_bar z + B_y y + B_u u`, `u_z = C_bar z`, `u = T_u^-1 u_z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "conversion")]
pub struct ConversionResult {
    #[serde(rename = "T")]
    pub t: RatMatrix,
    #[serde(rename = "T_inv")]
    pub t_inv: RatMatrix,
    #[serde(rename = "R")]
    pub r: RatMatrix,
    #[serde(rename = "T_u")]
    pub t_u: RatMatrix,
    /// `T(F - RH)T^-1`.
    #[serde(rename = "A_bar")]
    pub a_bar: RatMatrix,
    /// `TG`.
    #[serde(rename = "B_y")]
    pub b_y: RatMatrix,
    /// `TR`.
    #[serde(rename = "B_u")]
    pub b_u: RatMatrix,
    /// `T_u H T^-1`.
    #[serde(rename = "C_bar")]
    pub c_bar: RatMatrix,
    /// `T F W_n`, the first block column of `T F T^-1`.
    #[serde(rename = "A_blocks")]
    pub a_blocks: RatMatrix,
    /// `k_1, ..., k_n`.
    pub block_sizes: Vec<usize>,
}

impl ConversionResult {
    pub fn n(&self) -> usize {
        self.a_bar.rows()
    }

    pub fn m(&self) -> usize {
        self.c_bar.rows()
    }

    pub fn p(&self) -> usize {
        self.b_y.cols()
    }

    /// `T_u^-1`, used to restore `u` from `u_z`.
    pub fn t_u_inv(&self) -> RatMatrix {
        self.t_u.inverse().expect("T_u is invertible")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("conversion serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `R = F W_n (H W_n)^-1`, `T_u = (H W_n)^-1`, and the transformed matrices.
///
/// The pair `(F, H)` must already be observable; unobservable controllers
/// are rejected rather than silently reduced.
pub fn build_conversion(spec: &ControllerSpec) -> Result<ConversionResult> {
    let a1 = algorithm1(spec.f(), spec.h())?;
    let (f, g, h) = (spec.f(), spec.g(), spec.h());
    let w_n = a1.w_last();
    let t_u = h.try_mul(w_n)?.inverse()?;
    let fw = f.try_mul(w_n)?;
    let r = fw.try_mul(&t_u)?;
    let closed = f.try_sub(&r.try_mul(h)?)?;
    let a_bar = a1.t.try_mul(&closed)?.try_mul(&a1.t_inv)?;
    let c_bar = t_u.try_mul(h)?.try_mul(&a1.t_inv)?;
    Ok(ConversionResult {
        b_y: a1.t.try_mul(g)?,
        b_u: a1.t.try_mul(&r)?,
        a_blocks: a1.t.try_mul(&fw)?,
        t: a1.t,
        t_inv: a1.t_inv,
        r,
        t_u,
        a_bar,
        c_bar,
        block_sizes: a1.block_sizes,
    })
}

/// The `{0,1}` shift matrix determined by the block sizes `k_1..k_n`: block
/// column of `W_(i-1)` carries `[I_(k_(i-1)); 0]` in the block row of `W_i`.
pub fn expected_state_matrix(block_sizes: &[usize]) -> RatMatrix {
    let n: usize = block_sizes.iter().sum();
    let nb = block_sizes.len();
    // position p holds W_(nb - p)
    let sizes: Vec<usize> = block_sizes.iter().rev().copied().collect();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let mut a = RatMatrix::zeros(n, n);
    for p in 1..nb {
        for j in 0..sizes[p] {
            a[(offsets[p - 1] + j, offsets[p] + j)] = num_traits::One::one();
        }
    }
    a
}

/// One named predicate of [`verify_canonical`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalReport {
    pub checks: Vec<Check>,
}

impl CanonicalReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            passed,
            detail: if passed { String::new() } else { detail.into() },
        });
    }
}

/// Re-derives every matrix of `c` from `spec` and `(T, R, T_u)` and reports
/// each violated predicate. Never fails; problems become report entries.
pub fn verify_canonical(c: &ConversionResult, spec: &ControllerSpec) -> CanonicalReport {
    let mut rep = CanonicalReport { checks: Vec::new() };
    let (n, m) = (spec.n(), spec.m());
    let shapes_ok = c.t.shape() == (n, n)
        && c.t_inv.shape() == (n, n)
        && c.r.shape() == (n, m)
        && c.t_u.shape() == (m, m)
        && c.a_bar.shape() == (n, n)
        && c.c_bar.shape() == (m, n)
        && c.b_y.shape() == (n, spec.p())
        && c.b_u.shape() == (n, m);
    rep.push(
        "shapes",
        shapes_ok,
        "matrix shapes do not match the controller",
    );
    if !shapes_ok {
        return rep;
    }

    let ident = RatMatrix::identity(n);
    let inverse_ok = c.t.inverse().is_ok() && &c.t * &c.t_inv == ident && &c.t_inv * &c.t == ident;
    rep.push(
        "T invertible",
        inverse_ok,
        "T is singular or T_inv is not its inverse",
    );

    let binary = c.a_bar.is_binary() && c.c_bar.is_binary();
    rep.push(
        "{0,1} entries",
        binary,
        "A_bar or C_bar has an entry outside {0,1}",
    );

    let nilpotent = c.a_bar.pow(n as u32).map(|p| p.is_zero()).unwrap_or(false);
    rep.push("A_bar nilpotent", nilpotent, "A_bar^n is not zero");

    let mut c_expect = RatMatrix::zeros(m, n);
    c_expect.set_block(0, 0, &RatMatrix::identity(m));
    rep.push(
        "C_bar = [I_m, 0]",
        c.c_bar == c_expect,
        format!("C_bar = {}", c.c_bar),
    );

    let sizes_ok = c.block_sizes.len() == n
        && c.block_sizes.iter().sum::<usize>() == n
        && c.block_sizes.windows(2).all(|w| w[0] <= w[1])
        && c.block_sizes.last() == Some(&m);
    rep.push("block sizes", sizes_ok, format!("k = {:?}", c.block_sizes));
    if sizes_ok {
        rep.push(
            "shift structure",
            c.a_bar == expected_state_matrix(&c.block_sizes),
            "A_bar differs from the block shift matrix",
        );
    }

    if !inverse_ok {
        return rep;
    }
    let (f, g, h) = (spec.f(), spec.g(), spec.h());
    let closed = f - &(&c.r * h);
    rep.push(
        "A_bar = T(F-RH)T^-1",
        &(&c.t * &closed) * &c.t_inv == c.a_bar,
        "state matrix does not match its definition",
    );
    rep.push(
        "C_bar = T_u H T^-1",
        &(&c.t_u * h) * &c.t_inv == c.c_bar,
        "output matrix does not match its definition",
    );
    rep.push("B_y = TG", &c.t * g == c.b_y, "B_y != TG");
    rep.push("B_u = TR", &c.t * &c.r == c.b_u, "B_u != TR");

    let w_n = c.t_inv.columns_range(0, m);
    match (h * &w_n).inverse() {
        Ok(hw_inv) => {
            rep.push("T_u = (HW_n)^-1", hw_inv == c.t_u, "T_u != (HW_n)^-1");
            rep.push(
                "R = FW_n(HW_n)^-1",
                &(f * &w_n) * &hw_inv == c.r,
                "R != FW_n(HW_n)^-1",
            );
        }
        Err(_) => rep.push("HW_n invertible", false, "HW_n is singular"),
    }
    rep
}
