use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::exact::{Controller, LiftedRuntime, TransformedRuntime};
use super::int::{quantize, raise, IntMatrix};
use super::{max_abs, QuantParams};
use crate::canon::ConversionResult;
use crate::error::{dim_err, Result};
use crate::intermit::IntermittentResult;
use crate::ratmath::rational::denominator_lcm;
use crate::ratmath::{RatMatrix, Rational};

/// Largest `s = 1/L` (L a positive integer) making every `m / s` integral.
pub fn exact_scale(mats: &[&RatMatrix]) -> Rational {
    let lcm = denominator_lcm(mats.iter().flat_map(|m| m.entries()));
    Rational::new(BigInt::one(), lcm)
}

/// The two rational input matrices of an integer runtime: one for the
/// measured signal, one for the fed-back output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub b_y: RatMatrix,
    pub b_u: RatMatrix,
}

impl InputPaths {
    pub fn from_conversion(c: &ConversionResult) -> Self {
        Self {
            b_y: c.b_y.clone(),
            b_u: c.b_u.clone(),
        }
    }

    pub fn from_intermittent(ir: &IntermittentResult) -> Self {
        Self {
            b_y: ir.b_y.clone(),
            b_u: ir.b_u.clone(),
        }
    }
}

/// Max-norm of `rs (round(B_y/s) round(y/r) + round(B_u/s) round(u/r)) - (B_y y + B_u u)`.
pub fn quant_residual(
    paths: &InputPaths,
    q: &QuantParams,
    y: &[Rational],
    u_hat: &[Rational],
) -> Result<Rational> {
    let (in_y, _) = IntMatrix::scaled(&paths.b_y, &q.s);
    let (in_u, _) = IntMatrix::scaled(&paths.b_u, &q.s);
    let quantized: Vec<BigInt> = in_y
        .mul_vec(&quantize(y, &q.r))?
        .into_iter()
        .zip(in_u.mul_vec(&quantize(u_hat, &q.r))?)
        .map(|(a, b)| a + b)
        .collect();
    let exact: Vec<Rational> = paths
        .b_y
        .mul_vec(y)?
        .into_iter()
        .zip(paths.b_u.mul_vec(u_hat)?)
        .map(|(a, b)| a + b)
        .collect();
    let rs = q.rs();
    Ok(max_abs(
        quantized
            .into_iter()
            .zip(exact)
            .map(|(a, e)| Rational::from_integer(a) * &rs - e),
    ))
}

/// One step of an integer runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub y: Vec<Rational>,
    /// Output of the exact rational controller driven by the same inputs.
    pub u_exact: Vec<Rational>,
    /// Output recovered from the integer state.
    pub u_hat: Vec<Rational>,
    /// Input-path rounding residual of the state update performed on this step
    /// (zero on steps without an update).
    pub residual_norm: Rational,
    pub z_bar_range: (BigInt, BigInt),
    pub z_bar: Vec<BigInt>,
    pub y_bar: Vec<BigInt>,
    pub u_z: Vec<BigInt>,
    /// Quantized fed-back output, present on re-encryption steps.
    pub u_bar: Option<Vec<BigInt>>,
    pub reencrypted: bool,
    /// Largest magnitude per integer signal on this step; `products` covers
    /// every scalar product and partial sum.
    pub peaks: BTreeMap<&'static str, BigInt>,
}

impl TraceRecord {
    pub fn error_norm(&self) -> Rational {
        max_abs(self.u_hat.iter().zip(&self.u_exact).map(|(a, b)| a - b))
    }
}

fn peak_of(v: &[BigInt]) -> BigInt {
    let mut p = BigInt::zero();
    for x in v {
        raise(&mut p, x);
    }
    p
}

fn range_of(v: &[BigInt]) -> (BigInt, BigInt) {
    let min = v.iter().min().cloned().unwrap_or_default();
    let max = v.iter().max().cloned().unwrap_or_default();
    (min, max)
}

/// `sum M_i v_i`, each product formed separately and then accumulated in
/// order, raising `peak` over every product, partial sum and running total.
fn affine(parts: &[(&IntMatrix, &[BigInt])], peak: &mut BigInt) -> Result<Vec<BigInt>> {
    let mut total: Option<Vec<BigInt>> = None;
    for (m, v) in parts {
        let term = m.mul_vec_tracked(v, peak)?;
        total = Some(match total {
            None => term,
            Some(acc) => acc
                .into_iter()
                .zip(term)
                .map(|(a, b)| {
                    let s = a + b;
                    raise(peak, &s);
                    s
                })
                .collect(),
        });
    }
    Ok(total.unwrap_or_default())
}

fn recover(u_z: &[BigInt], factor: &RatMatrix) -> Result<Vec<Rational>> {
    let v: Vec<Rational> = u_z.iter().cloned().map(Rational::from_integer).collect();
    factor.mul_vec(&v)
}

/// How the output matrix is brought to integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputScaling {
    /// The converted output matrix is already integral and is used as is.
    #[default]
    Integer,
    /// The output matrix is also scaled by `1/s`; the scale factor is then
    /// applied twice on the way to the output.
    DoubleScaled,
}

/// Per-step re-encryption runtime in converted coordinates.
#[derive(Debug, Clone)]
pub struct ConvertedRuntime {
    q: QuantParams,
    state_matrix: IntMatrix,
    input_y: IntMatrix,
    input_u: IntMatrix,
    output: IntMatrix,
    recover: RatMatrix,
    paths: InputPaths,
    rounded_inputs: bool,
    z: Vec<BigInt>,
    reference: TransformedRuntime,
    t: usize,
}

impl ConvertedRuntime {
    pub fn new(c: &ConversionResult, q: &QuantParams, x0: &[Rational]) -> Result<Self> {
        Self::with_scaling(c, q, x0, OutputScaling::Integer)
    }

    pub fn with_scaling(
        c: &ConversionResult,
        q: &QuantParams,
        x0: &[Rational],
        scaling: OutputScaling,
    ) -> Result<Self> {
        let state_matrix = IntMatrix::from_exact(&c.a_bar, "A_bar")?;
        let (input_y, ry) = IntMatrix::scaled(&c.b_y, &q.s);
        let (input_u, ru) = IntMatrix::scaled(&c.b_u, &q.s);
        let (output, factor) = match scaling {
            OutputScaling::Integer => (IntMatrix::from_exact(&c.c_bar, "C_bar")?, q.rs()),
            OutputScaling::DoubleScaled => (IntMatrix::scaled(&c.c_bar, &q.s).0, q.rs() * &q.s),
        };
        let z0 = c.t.mul_vec(x0)?;
        Ok(Self {
            state_matrix,
            input_y,
            input_u,
            output,
            recover: c.t_u_inv().scale(&factor),
            paths: InputPaths::from_conversion(c),
            rounded_inputs: ry || ru,
            z: quantize(&z0, &q.rs()),
            reference: TransformedRuntime::new(c, x0)?,
            q: q.clone(),
            t: 0,
        })
    }

    pub fn params(&self) -> &QuantParams {
        &self.q
    }

    pub fn state_matrix(&self) -> &IntMatrix {
        &self.state_matrix
    }

    pub fn input_y(&self) -> &IntMatrix {
        &self.input_y
    }

    pub fn input_u(&self) -> &IntMatrix {
        &self.input_u
    }

    pub fn output_matrix(&self) -> &IntMatrix {
        &self.output
    }

    /// Whether `B_y/s` or `B_u/s` needed rounding.
    pub fn rounds_inputs(&self) -> bool {
        self.rounded_inputs
    }

    pub fn state(&self) -> &[BigInt] {
        &self.z
    }

    /// Recovers `u_hat` from an integer output.
    pub fn recover_output(&self, u_z: &[BigInt]) -> Result<Vec<Rational>> {
        recover(u_z, &self.recover)
    }

    pub fn step_record(&mut self, y: &[Rational]) -> Result<TraceRecord> {
        if y.len() != self.input_y.cols() {
            return dim_err(format!(
                "expected an input of length {}, got {}",
                self.input_y.cols(),
                y.len()
            ));
        }
        let mut products = BigInt::zero();
        let u_z = self.output.mul_vec_tracked(&self.z, &mut products)?;
        let u_hat = self.recover_output(&u_z)?;
        let u_exact = self.reference.step(y)?;
        let y_bar = quantize(y, &self.q.r);
        let u_bar = quantize(&u_hat, &self.q.r);
        let next = affine(
            &[
                (&self.state_matrix, &self.z),
                (&self.input_y, &y_bar),
                (&self.input_u, &u_bar),
            ],
            &mut products,
        )?;
        let residual_norm = quant_residual(&self.paths, &self.q, y, &u_hat)?;
        let peaks = BTreeMap::from([
            ("z_bar", peak_of(&self.z)),
            ("y_bar", peak_of(&y_bar)),
            ("u_bar", peak_of(&u_bar)),
            ("u_z", peak_of(&u_z)),
            ("products", products),
        ]);
        let z_bar = std::mem::replace(&mut self.z, next);
        let rec = TraceRecord {
            t: self.t,
            y: y.to_vec(),
            u_exact,
            u_hat,
            residual_norm,
            z_bar_range: range_of(&z_bar),
            z_bar,
            y_bar,
            u_z,
            u_bar: Some(u_bar),
            reencrypted: true,
            peaks,
        };
        self.t += 1;
        Ok(rec)
    }
}

impl Controller for ConvertedRuntime {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>> {
        Ok(self.step_record(y)?.u_hat)
    }
}

/// Runtime with re-encryption only at multiples of the period `k`.
#[derive(Debug, Clone)]
pub struct IntermittentRuntime {
    q: QuantParams,
    k: usize,
    state_matrix: IntMatrix,
    input_y: IntMatrix,
    input_u: IntMatrix,
    out_state: Vec<IntMatrix>,
    out_input: Vec<IntMatrix>,
    factor: Rational,
    paths: InputPaths,
    z: Vec<BigInt>,
    y_buffer: Vec<BigInt>,
    y_exact: Vec<Rational>,
    u_bar_start: Vec<BigInt>,
    u_hat_start: Vec<Rational>,
    reference: LiftedRuntime,
    t: usize,
}

impl IntermittentRuntime {
    pub fn new(ir: &IntermittentResult, q: &QuantParams, x0: &[Rational]) -> Result<Self> {
        let state_matrix = IntMatrix::from_exact(&ir.a_bar, "A_bar")?;
        let input_y = IntMatrix::scaled(&ir.b_y, &q.s).0;
        let input_u = IntMatrix::scaled(&ir.b_u, &q.s).0;
        let s2 = &q.s * &q.s;
        let out_state: Vec<IntMatrix> = ir
            .out_state
            .iter()
            .map(|m| IntMatrix::scaled(m, &q.s).0)
            .collect();
        let out_input: Vec<IntMatrix> = ir
            .out_input
            .iter()
            .map(|m| IntMatrix::scaled(m, &s2).0)
            .collect();
        let z0 = ir.t.mul_vec(x0)?;
        Ok(Self {
            k: ir.k as usize,
            state_matrix,
            input_y,
            input_u,
            out_state,
            out_input,
            factor: q.rs() * &q.s,
            paths: InputPaths::from_intermittent(ir),
            z: quantize(&z0, &q.rs()),
            y_buffer: Vec::new(),
            y_exact: Vec::new(),
            u_bar_start: Vec::new(),
            u_hat_start: Vec::new(),
            reference: LiftedRuntime::transformed(ir, x0)?,
            q: q.clone(),
            t: 0,
        })
    }

    pub fn period(&self) -> usize {
        self.k
    }

    pub fn params(&self) -> &QuantParams {
        &self.q
    }

    pub fn state_matrix(&self) -> &IntMatrix {
        &self.state_matrix
    }

    pub fn input_y(&self) -> &IntMatrix {
        &self.input_y
    }

    pub fn input_u(&self) -> &IntMatrix {
        &self.input_u
    }

    /// Integer state-to-output matrix for phase `i` of the period.
    pub fn out_state(&self, i: usize) -> &IntMatrix {
        &self.out_state[i]
    }

    /// Integer input-to-output matrix for phase `i` of the period.
    pub fn out_input(&self, i: usize) -> &IntMatrix {
        &self.out_input[i]
    }

    pub fn state(&self) -> &[BigInt] {
        &self.z
    }

    pub fn recover_output(&self, u_z: &[BigInt]) -> Vec<Rational> {
        u_z.iter()
            .map(|v| Rational::from_integer(v.clone()) * &self.factor)
            .collect()
    }

    pub fn step_record(&mut self, y: &[Rational]) -> Result<TraceRecord> {
        let p = self.input_y.cols() / self.k;
        if y.len() != p {
            return dim_err(format!("expected an input of length {p}, got {}", y.len()));
        }
        let phase = self.t % self.k;
        let mut products = BigInt::zero();
        let u_z = affine(
            &[
                (&self.out_state[phase], &self.z),
                (&self.out_input[phase], &self.y_buffer),
            ],
            &mut products,
        )?;
        let u_hat = self.recover_output(&u_z);
        let u_bar = (phase == 0).then(|| quantize(&u_hat, &self.q.r));
        if let Some(ub) = &u_bar {
            self.u_bar_start = ub.clone();
            self.u_hat_start = u_hat.clone();
        }
        let u_exact = self.reference.step(y)?;
        let y_bar = quantize(y, &self.q.r);
        self.y_buffer.extend_from_slice(&y_bar);
        self.y_exact.extend_from_slice(y);

        let z_bar = self.z.clone();
        let mut residual_norm = Rational::zero();
        if phase + 1 == self.k {
            self.z = affine(
                &[
                    (&self.state_matrix, &self.z),
                    (&self.input_y, &self.y_buffer),
                    (&self.input_u, &self.u_bar_start),
                ],
                &mut products,
            )?;
            residual_norm = quant_residual(&self.paths, &self.q, &self.y_exact, &self.u_hat_start)?;
            self.y_buffer.clear();
            self.y_exact.clear();
        }
        let mut peaks = BTreeMap::from([
            ("z_bar", peak_of(&z_bar)),
            ("y_bar", peak_of(&y_bar)),
            ("u_z", peak_of(&u_z)),
            ("products", products),
        ]);
        if let Some(ub) = &u_bar {
            peaks.insert("u_bar", peak_of(ub));
        }
        let rec = TraceRecord {
            t: self.t,
            y: y.to_vec(),
            u_exact,
            u_hat,
            residual_norm,
            z_bar_range: range_of(&z_bar),
            z_bar,
            y_bar,
            u_z,
            reencrypted: u_bar.is_some(),
            u_bar,
            peaks,
        };
        self.t += 1;
        Ok(rec)
    }
}

impl Controller for IntermittentRuntime {
    fn step(&mut self, y: &[Rational]) -> Result<Vec<Rational>> {
        Ok(self.step_record(y)?.u_hat)
    }
}

fn check_horizon(inputs: &[Vec<Rational>], horizon: usize) -> Result<()> {
    if inputs.len() < horizon {
        return dim_err(format!("{} inputs for horizon {horizon}", inputs.len()));
    }
    Ok(())
}

pub fn run_converted(
    c: &ConversionResult,
    q: &QuantParams,
    x0: &[Rational],
    inputs: &[Vec<Rational>],
    horizon: usize,
) -> Result<Vec<TraceRecord>> {
    check_horizon(inputs, horizon)?;
    let mut rt = ConvertedRuntime::new(c, q, x0)?;
    inputs[..horizon]
        .iter()
        .map(|y| rt.step_record(y))
        .collect()
}

pub fn run_intermittent_rt(
    ir: &IntermittentResult,
    q: &QuantParams,
    x0: &[Rational],
    inputs: &[Vec<Rational>],
    horizon: usize,
) -> Result<Vec<TraceRecord>> {
    check_horizon(inputs, horizon)?;
    let mut rt = IntermittentRuntime::new(ir, q, x0)?;
    inputs[..horizon]
        .iter()
        .map(|y| rt.step_record(y))
        .collect()
}

/// Largest `|u_hat - u_exact|` over a trace.
pub fn max_output_error(trace: &[TraceRecord]) -> Rational {
    max_abs(trace.iter().map(TraceRecord::error_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::build_conversion;
    use crate::intermit::build_intermittent;
    use crate::qrt::exact::{run_exact, ExactSystem};
    use crate::ratmath::{frac, int};
    use crate::sysobs::ControllerSpec;

    fn shift_spec(x0: &[i64]) -> ControllerSpec {
        ControllerSpec::new(
            RatMatrix::from_i64(2, 2, &[0, 1, 0, 0]),
            RatMatrix::from_i64(2, 1, &[0, 1]),
            RatMatrix::from_i64(1, 2, &[1, 1]),
            RatMatrix::from_i64(2, 1, x0),
        )
        .unwrap()
    }

    fn step_inputs(n: usize) -> Vec<Vec<Rational>> {
        vec![vec![int(1)]; n]
    }

    #[test]
    fn integer_data_is_exact_at_unit_scale() {
        let spec = shift_spec(&[2, -1]);
        let c = build_conversion(&spec).unwrap();
        let ys: Vec<Vec<Rational>> = (0..15).map(|t| vec![int((t % 4) - 1)]).collect();
        let trace = run_converted(
            &c,
            &QuantParams::default(),
            &spec.x0().column_values(0),
            &ys,
            15,
        )
        .unwrap();
        let exact = run_exact(&ExactSystem::Original(&spec), &ys, 15).unwrap();
        for (rec, u) in trace.iter().zip(&exact) {
            assert_eq!(&rec.u_hat, u);
            assert_eq!(&rec.u_exact, u);
            assert!(rec.residual_norm.is_zero());
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let spec = shift_spec(&[0, 0]);
        let c = build_conversion(&spec).unwrap();
        let q = QuantParams::decade(3);
        let trace = run_converted(&c, &q, &[int(0), int(0)], &vec![vec![int(0)]; 10], 10).unwrap();
        assert!(trace.iter().all(|r| r.u_hat.iter().all(Zero::is_zero)));
    }

    #[test]
    fn finer_quantization_reduces_error() {
        let spec = shift_spec(&[0, 0]);
        let c = build_conversion(&spec).unwrap();
        let x0 = [frac(1, 3), frac(-2, 7)];
        let ys: Vec<Vec<Rational>> = (0..20).map(|t| vec![frac(t % 3 + 1, 7)]).collect();
        let coarse =
            max_output_error(&run_converted(&c, &QuantParams::decade(3), &x0, &ys, 20).unwrap());
        let fine =
            max_output_error(&run_converted(&c, &QuantParams::decade(4), &x0, &ys, 20).unwrap());
        assert!(fine < coarse, "{fine} !< {coarse}");
    }

    #[test]
    fn intermittent_reencrypts_on_period_starts() {
        let spec = shift_spec(&[1, 0]);
        let ir = build_intermittent(&spec, 2).unwrap();
        let trace = run_intermittent_rt(
            &ir,
            &QuantParams::decade(3),
            &spec.x0().column_values(0),
            &step_inputs(11),
            11,
        )
        .unwrap();
        for rec in &trace {
            assert_eq!(rec.reencrypted, rec.t % 2 == 0);
        }
        assert!(max_output_error(&trace) < frac(1, 100));
    }

    #[test]
    fn intermittent_exact_at_unit_scale() {
        let spec = shift_spec(&[3, -2]);
        let ir = build_intermittent(&spec, 3).unwrap();
        let ys: Vec<Vec<Rational>> = (0..14).map(|t| vec![int(2 - t % 5)]).collect();
        let trace = run_intermittent_rt(
            &ir,
            &QuantParams::default(),
            &spec.x0().column_values(0),
            &ys,
            14,
        )
        .unwrap();
        let exact = run_exact(&ExactSystem::Original(&spec), &ys, 14).unwrap();
        for (rec, u) in trace.iter().zip(&exact) {
            assert_eq!(&rec.u_hat, u);
        }
    }

    #[test]
    fn scalar_intermittent_converges() {
        let spec = ControllerSpec::new(
            RatMatrix::new(1, 1, vec![frac(1, 2)]).unwrap(),
            RatMatrix::from_i64(1, 1, &[1]),
            RatMatrix::from_i64(1, 1, &[1]),
            RatMatrix::new(1, 1, vec![frac(1, 3)]).unwrap(),
        )
        .unwrap();
        let ir = build_intermittent(&spec, 3).unwrap();
        let ys: Vec<Vec<Rational>> = (0..12).map(|t| vec![frac(t % 2 + 1, 3)]).collect();
        let x0 = spec.x0().column_values(0);
        let coarse = max_output_error(
            &run_intermittent_rt(&ir, &QuantParams::decade(2), &x0, &ys, 12).unwrap(),
        );
        let fine = max_output_error(
            &run_intermittent_rt(&ir, &QuantParams::decade(4), &x0, &ys, 12).unwrap(),
        );
        assert!(fine < coarse);
    }

    #[test]
    fn residual_examples() {
        let spec = shift_spec(&[0, 0]);
        let c = build_conversion(&spec).unwrap();
        let paths = InputPaths::from_conversion(&c);
        let q = QuantParams::decade(2);
        assert!(quant_residual(&paths, &q, &[int(0)], &[int(0)])
            .unwrap()
            .is_zero());
        let y = [frac(1234567, 1000000)];
        let u = [frac(-7654321, 1000000)];
        let coarse = quant_residual(&paths, &q, &y, &u).unwrap();
        let fine = quant_residual(&paths, &QuantParams::decade(3), &y, &u).unwrap();
        assert!(fine < coarse);
    }

    #[test]
    fn exact_scale_clears_denominators() {
        let m = RatMatrix::new(1, 3, vec![frac(1, 4), frac(5, 6), int(2)]).unwrap();
        assert_eq!(exact_scale(&[&m]), frac(1, 12));
        let (_, rounded) = IntMatrix::scaled(&m, &frac(1, 12));
        assert!(!rounded);
    }
}
