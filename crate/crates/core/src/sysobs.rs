//! Observability of `(F, H)`: the unobservability subspace chain, the
//! observability test, and reduction to an observable controller.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::ratmath::RatMatrix;

/// Linear controller `x(t+1) = F x(t) + G y(t)`, `u(t) = H x(t)`, `x(0) = x0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerSpec {
    f: RatMatrix,
    g: RatMatrix,
    h: RatMatrix,
    x0: RatMatrix,
    name: Option<String>,
}

impl ControllerSpec {
    /// Validates dimensions (`n, p, m >= 1`) and that `H` has full row rank.
    pub fn new(f: RatMatrix, g: RatMatrix, h: RatMatrix, x0: RatMatrix) -> Result<Self> {
        let n = f.rows();
        if n == 0 || !f.is_square() {
            return dim_err(format!(
                "F must be square and non-empty, got {:?}",
                f.shape()
            ));
        }
        if g.rows() != n || g.cols() == 0 {
            return dim_err(format!("G must be {n}xp with p >= 1, got {:?}", g.shape()));
        }
        if h.cols() != n || h.rows() == 0 {
            return dim_err(format!("H must be mx{n} with m >= 1, got {:?}", h.shape()));
        }
        if x0.shape() != (n, 1) {
            return dim_err(format!("x0 must be {n}x1, got {:?}", x0.shape()));
        }
        if h.rank() < h.rows() {
            return Err(Error::NotFullRowRank);
        }
        Ok(Self {
            f,
            g,
            h,
            x0,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn f(&self) -> &RatMatrix {
        &self.f
    }

    pub fn g(&self) -> &RatMatrix {
        &self.g
    }

    pub fn h(&self) -> &RatMatrix {
        &self.h
    }

    pub fn x0(&self) -> &RatMatrix {
        &self.x0
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.f.rows()
    }

    /// Input (measurement) dimension.
    pub fn p(&self) -> usize {
        self.g.cols()
    }

    /// Output (control) dimension.
    pub fn m(&self) -> usize {
        self.h.rows()
    }

    /// Same controller with a different initial state.
    pub fn with_x0(&self, x0: RatMatrix) -> Result<Self> {
        if x0.shape() != (self.n(), 1) {
            return dim_err("x0 has the wrong shape");
        }
        Ok(Self { x0, ..self.clone() })
    }
}

#[derive(Serialize, Deserialize)]
struct ControllerDoc {
    #[serde(rename = "F")]
    f: RatMatrix,
    #[serde(rename = "G")]
    g: RatMatrix,
    #[serde(rename = "H")]
    h: RatMatrix,
    x0: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl ControllerSpec {
    /// Parses `{"F": [[..]], "G": [[..]], "H": [[..]], "x0": [..], "name": ".."}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ControllerDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let x0 = doc
            .x0
            .iter()
            .map(crate::ratmath::rational_from_json)
            .collect::<Result<Vec<_>>>()?;
        let spec = Self::new(doc.f, doc.g, doc.h, RatMatrix::column_vector(x0))?;
        Ok(match doc.name {
            Some(n) => spec.with_name(n),
            None => spec,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ControllerDoc {
            f: self.f.clone(),
            g: self.g.clone(),
            h: self.h.clone(),
            x0: self
                .x0
                .entries()
                .iter()
                .map(|v| serde_json::Value::String(crate::ratmath::format_rational(v)))
                .collect(),
            name: self.name.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("controller serializes")
    }
}

/// Stacked `[H; HF; ...; HF^(blocks-1)]` (a `0 x n` matrix when `blocks == 0`).
pub fn observability_stack(f: &RatMatrix, h: &RatMatrix, blocks: usize) -> Result<RatMatrix> {
    check_pair(f, h)?;
    let mut parts = Vec::with_capacity(blocks);
    let mut cur = h.clone();
    for _ in 0..blocks {
        let next = cur.try_mul(f)?;
        parts.push(cur);
        cur = next;
    }
    if parts.is_empty() {
        return Ok(RatMatrix::zeros(0, f.cols()));
    }
    RatMatrix::vstack(&parts.iter().collect::<Vec<_>>())
}

fn check_pair(f: &RatMatrix, h: &RatMatrix) -> Result<()> {
    if !f.is_square() {
        return dim_err(format!("F must be square, got {:?}", f.shape()));
    }
    if h.cols() != f.rows() {
        return dim_err(format!(
            "H has {} columns but F is {}x{}",
            h.cols(),
            f.rows(),
            f.cols()
        ));
    }
    Ok(())
}

/// The nested kernels `U_i = ker [H; HF; ...; HF^(i-1)]`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceChain {
    /// `bases[j]` spans `U_(n-j)`: from `U_n` down to `U_0 = R^n`.
    bases: Vec<RatMatrix>,
}

impl SubspaceChain {
    pub fn n(&self) -> usize {
        self.bases.len() - 1
    }

    /// Basis of `U_i` as matrix columns.
    pub fn u(&self, i: usize) -> &RatMatrix {
        &self.bases[self.n() - i]
    }

    pub fn dim(&self, i: usize) -> usize {
        self.u(i).cols()
    }

    /// Bases ordered `U_n, U_(n-1), ..., U_0`.
    pub fn bases(&self) -> &[RatMatrix] {
        &self.bases
    }
}

pub fn unobs_chain(f: &RatMatrix, h: &RatMatrix) -> Result<SubspaceChain> {
    check_pair(f, h)?;
    let n = f.rows();
    let mut bases = Vec::with_capacity(n + 1);
    bases.push(RatMatrix::identity(n));
    let mut stack = RatMatrix::zeros(0, n);
    let mut block = h.clone();
    for _ in 1..=n {
        stack = RatMatrix::vstack(&[&stack, &block])?;
        block = block.try_mul(f)?;
        bases.push(stack.kernel_basis());
    }
    bases.reverse();
    Ok(SubspaceChain { bases })
}

pub fn is_observable(f: &RatMatrix, h: &RatMatrix) -> Result<bool> {
    let chain = unobs_chain(f, h)?;
    Ok(chain.dim(chain.n()) == 0)
}

/// Maximal independent subset of the rows of `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSelection {
    /// Indices of the kept rows, increasing.
    pub rows: Vec<usize>,
    /// `r x m` selection matrix `S` with `reduced = S * h`.
    pub selection: RatMatrix,
    pub reduced: RatMatrix,
}

/// Keeps the rows of `h` that appear as pivots of `h^T`; the row space, and
/// therefore every kernel built from `h`, is unchanged.
pub fn row_basis(h: &RatMatrix) -> RowSelection {
    let (_, rows) = h.transpose().rref();
    let selection = RatMatrix::identity(h.rows()).select_rows(&rows);
    let reduced = h.select_rows(&rows);
    RowSelection {
        rows,
        selection,
        reduced,
    }
}

/// Drops the unobservable part of the controller.
///
/// The unobservable subspace `U_n` is completed to a basis of `R^n` with
/// standard basis vectors in pivot order; in those coordinates `F` is block
/// upper triangular and `H` vanishes on the first block. The initial state is
/// projected onto the observable coordinates, which is all the output ever sees.
pub fn kalman_reduce(spec: &ControllerSpec) -> ControllerSpec {
    let n = spec.n();
    let chain = unobs_chain(spec.f(), spec.h()).expect("spec dimensions are validated");
    let unobs = chain.u(n);
    let d = unobs.cols();
    if d == 0 {
        return spec.clone();
    }
    let completion =
        RatMatrix::complete_with(unobs, &RatMatrix::identity(n)).expect("same row count");
    let q = RatMatrix::hstack(&[unobs, &completion]).expect("same row count");
    let q_inv = q.inverse().expect("completed basis is invertible");
    let f_t = &(&q_inv * spec.f()) * &q;
    let g_t = &q_inv * spec.g();
    let h_t = spec.h() * &q;
    let x0_t = &q_inv * spec.x0();
    let r = n - d;
    let reduced = ControllerSpec::new(
        f_t.block(d, d, r, r),
        g_t.rows_range(d, n),
        h_t.columns_range(d, n),
        x0_t.rows_range(d, n),
    )
    .expect("observable part keeps H at full row rank");
    match spec.name() {
        Some(name) => reduced.with_name(name),
        None => reduced,
    }
}
