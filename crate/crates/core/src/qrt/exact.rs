use crate::canon::ConversionResult;
use crate::error::{dim_err, Result};
use crate::intermit::{lifted_input_matrix, IntermittentResult};
use crate::ratmath::{RatMatrix, Rational};
use crate::sysobs::ControllerSpec;

/// A causal controller: `step` returns `u(t)` from the current state, then
/// consumes `y(t)` and advances.
pub trait Controller {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>>;
}

fn add_into(acc: &mut [Rational], v: Vec<Rational>) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn check_len(y: &[Rational], p: usize) -> Result<()> {
    if y.len() != p {
        return dim_err(format!("expected an input of length {p}, got {}", y.len()));
    }
    Ok(())
}

/// `x(t+1) = F x + G y`, `u = H x`.
#[derive(Debug, Clone)]
pub struct OriginalRuntime {
    f: RatMatrix,
    g: RatMatrix,
    h: RatMatrix,
    x: Vec<Rational>,
}

impl OriginalRuntime {
    pub fn new(spec: &ControllerSpec) -> Self {
        Self {
            f: spec.f().clone(),
            g: spec.g().clone(),
            h: spec.h().clone(),
            x: spec.x0().column_values(0),
        }
    }

    pub fn state(&self) -> &[Rational] {
        &self.x
    }
}

impl Controller for OriginalRuntime {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>> {
        check_len(y, self.g.cols())?;
        let u = self.h.mul_vec(&self.x)?;
        let mut next = self.f.mul_vec(&self.x)?;
        add_into(&mut next, self.g.mul_vec(y)?);
        self.x = next;
        Ok(u)
    }
}

/// `x(t+1) = (F - R H) x + G y + R u`, with the produced `u` fed back.
#[derive(Debug, Clone)]
pub struct ReencodedRuntime {
    state: RatMatrix,
    g: RatMatrix,
    r: RatMatrix,
    h: RatMatrix,
    x: Vec<Rational>,
}

impl ReencodedRuntime {
    pub fn new(spec: &ControllerSpec, r: &RatMatrix) -> Result<Self> {
        let state = spec.f().try_sub(&r.try_mul(spec.h())?)?;
        Ok(Self {
            state,
            g: spec.g().clone(),
            r: r.clone(),
            h: spec.h().clone(),
            x: spec.x0().column_values(0),
        })
    }
}

impl Controller for ReencodedRuntime {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>> {
        check_len(y, self.g.cols())?;
        let u = self.h.mul_vec(&self.x)?;
        let mut next = self.state.mul_vec(&self.x)?;
        add_into(&mut next, self.g.mul_vec(y)?);
        add_into(&mut next, self.r.mul_vec(&u)?);
        self.x = next;
        Ok(u)
    }
}

/// Converted coordinates: `z(t+1) = A_bar z + B_y y + B_u u`,
/// `u = T_u^-1 C_bar z`, `z(0) = T x0`.
#[derive(Debug, Clone)]
pub struct TransformedRuntime {
    a_bar: RatMatrix,
    b_y: RatMatrix,
    b_u: RatMatrix,
    out: RatMatrix,
    z: Vec<Rational>,
}

impl TransformedRuntime {
    pub fn new(c: &ConversionResult, x0: &[Rational]) -> Result<Self> {
        Ok(Self {
            a_bar: c.a_bar.clone(),
            b_y: c.b_y.clone(),
            b_u: c.b_u.clone(),
            out: c.t_u_inv().try_mul(&c.c_bar)?,
            z: c.t.mul_vec(x0)?,
        })
    }
}

impl Controller for TransformedRuntime {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>> {
        check_len(y, self.b_y.cols())?;
        let u = self.out.mul_vec(&self.z)?;
        let mut next = self.a_bar.mul_vec(&self.z)?;
        add_into(&mut next, self.b_y.mul_vec(y)?);
        add_into(&mut next, self.b_u.mul_vec(&u)?);
        self.z = next;
        Ok(u)
    }
}

/// Lifted dynamics with period `k`: the state moves only at the end of each
/// period, `z(t+k) = A z(t) + B_Y Y(t,k) + B_u u(t)`, and inside the period
/// `u(t+i) = C_i z(t) + D_i Y(t,i)`.
#[derive(Debug, Clone)]
pub struct LiftedRuntime {
    k: usize,
    a: RatMatrix,
    b_lift: RatMatrix,
    b_u: RatMatrix,
    out_state: Vec<RatMatrix>,
    out_input: Vec<RatMatrix>,
    z: Vec<Rational>,
    buffer: Vec<Rational>,
    u_start: Vec<Rational>,
    phase: usize,
}

impl LiftedRuntime {
    /// Plain lifted form of the original controller (no output injection).
    pub fn plain(spec: &ControllerSpec, k: u32) -> Result<Self> {
        let (f, g, h) = (spec.f(), spec.g(), spec.h());
        let k = k as usize;
        let mut out_state = Vec::with_capacity(k);
        let mut out_input = Vec::with_capacity(k);
        for i in 0..k {
            out_state.push(h.try_mul(&f.pow(i as u32)?)?);
            out_input.push(h.try_mul(&lifted_input_matrix(f, g, i)?)?);
        }
        Ok(Self {
            k,
            a: f.pow(k as u32)?,
            b_lift: lifted_input_matrix(f, g, k)?,
            b_u: RatMatrix::zeros(spec.n(), spec.m()),
            out_state,
            out_input,
            z: spec.x0().column_values(0),
            buffer: Vec::new(),
            u_start: Vec::new(),
            phase: 0,
        })
    }

    /// The converted lifted controller with its output fed back at period starts.
    pub fn transformed(ir: &IntermittentResult, x0: &[Rational]) -> Result<Self> {
        Ok(Self {
            k: ir.k as usize,
            a: ir.a_bar.clone(),
            b_lift: ir.b_y.clone(),
            b_u: ir.b_u.clone(),
            out_state: ir.out_state.clone(),
            out_input: ir.out_input.clone(),
            z: ir.t.mul_vec(x0)?,
            buffer: Vec::new(),
            u_start: Vec::new(),
            phase: 0,
        })
    }
}

impl Controller for LiftedRuntime {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>> {
        let p = self.b_lift.cols() / self.k.max(1);
        check_len(y, p)?;
        let i = self.phase;
        let mut u = self.out_state[i].mul_vec(&self.z)?;
        add_into(&mut u, self.out_input[i].mul_vec(&self.buffer)?);
        if i == 0 {
            self.u_start = u.clone();
        }
        self.buffer.extend_from_slice(y);
        if i + 1 == self.k {
            let mut next = self.a.mul_vec(&self.z)?;
            add_into(&mut next, self.b_lift.mul_vec(&self.buffer)?);
            add_into(&mut next, self.b_u.mul_vec(&self.u_start)?);
            self.z = next;
            self.buffer.clear();
            self.phase = 0;
        } else {
            self.phase += 1;
        }
        Ok(u)
    }
}

/// Exact reference systems that `run_exact` can drive.
#[derive(Debug, Clone)]
pub enum ExactSystem<'a> {
    /// The original controller.
    Original(&'a ControllerSpec),
    /// Output injection with gain `R`, true output fed back.
    Reencoded(&'a ControllerSpec, &'a RatMatrix),
    /// Converted coordinates, starting from `x0`.
    Transformed(&'a ConversionResult, &'a [Rational]),
    /// Lifted original with period `k`.
    Lifted(&'a ControllerSpec, u32),
    /// Lifted converted controller, starting from `x0`.
    LiftedTransformed(&'a IntermittentResult, &'a [Rational]),
}

impl ExactSystem<'_> {
    pub fn runtime(&self) -> Result<Box<dyn Controller>> {
        Ok(match *self {
            ExactSystem::Original(spec) => Box::new(OriginalRuntime::new(spec)),
            ExactSystem::Reencoded(spec, r) => Box::new(ReencodedRuntime::new(spec, r)?),
            ExactSystem::Transformed(c, x0) => Box::new(TransformedRuntime::new(c, x0)?),
            ExactSystem::Lifted(spec, k) => Box::new(LiftedRuntime::plain(spec, k)?),
            ExactSystem::LiftedTransformed(ir, x0) => Box::new(LiftedRuntime::transformed(ir, x0)?),
        })
    }
}

/// Drives `sys` open loop over `inputs[0..horizon]` and returns `u(0..horizon)`.
pub fn run_exact(
    sys: &ExactSystem<'_>,
    inputs: &[Vec<Rational>],
    horizon: usize,
) -> Result<Vec<Vec<Rational>>> {
    if inputs.len() < horizon {
        return dim_err(format!("{} inputs for horizon {horizon}", inputs.len()));
    }
    let mut rt = sys.runtime()?;
    inputs[..horizon].iter().map(|y| rt.step(y)).collect()
}
