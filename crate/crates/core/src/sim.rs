//! Closed-loop harness: an exact rational plant driven by any controller
//! variant, the auto-regressive baseline, and operation counts.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canon::build_conversion;
use crate::error::{dim_err, Error, Result};
use crate::intermit::build_intermittent;
use crate::qrt::{
    range_report, Controller, ConvertedRuntime, ExactSystem, IntermittentRuntime, OriginalRuntime,
    OutputScaling, QuantParams, TraceRecord,
};
use crate::ratmath::rational::to_f64;
use crate::ratmath::{
    char_poly, format_rational, frac, int, matrix_from_json, RatMatrix, Rational,
};
use crate::sandbox::{run_sandboxed, ModulusConfig, SandboxVariant};
use crate::sysobs::ControllerSpec;

/// Linear plant `xp(t+1) = A xp + B u`, `y = C xp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantSpec {
    a: RatMatrix,
    b: RatMatrix,
    c: RatMatrix,
    xp0: RatMatrix,
}

impl PlantSpec {
    pub fn new(a: RatMatrix, b: RatMatrix, c: RatMatrix, xp0: RatMatrix) -> Result<Self> {
        let nx = a.rows();
        if !a.is_square() || b.rows() != nx || c.cols() != nx || xp0.shape() != (nx, 1) {
            return dim_err(format!(
                "plant shapes A {:?}, B {:?}, C {:?}, xp0 {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                xp0.shape()
            ));
        }
        Ok(Self { a, b, c, xp0 })
    }

    pub fn a(&self) -> &RatMatrix {
        &self.a
    }

    pub fn b(&self) -> &RatMatrix {
        &self.b
    }

    pub fn c(&self) -> &RatMatrix {
        &self.c
    }

    pub fn xp0(&self) -> &RatMatrix {
        &self.xp0
    }

    /// Checks that the plant input/output sizes fit the controller.
    pub fn check_dual(&self, spec: &ControllerSpec) -> Result<()> {
        if self.b.cols() != spec.m() || self.c.rows() != spec.p() {
            return dim_err(format!(
                "plant takes {} inputs and gives {} outputs; controller gives {} and takes {}",
                self.b.cols(),
                self.c.rows(),
                spec.m(),
                spec.p()
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let field = |k: &str| {
            v.get(k)
                .ok_or_else(|| Error::Parse(format!("missing field {k}")))
        };
        let a = matrix_from_json(field("A")?)?;
        let xp0 = match v.get("xp0") {
            Some(x) => {
                let flat = matrix_from_json(&json!([x]))?;
                RatMatrix::column_vector(flat.into_entries())
            }
            None => RatMatrix::zeros(a.rows(), 1),
        };
        Self::new(
            a,
            matrix_from_json(field("B")?)?,
            matrix_from_json(field("C")?)?,
            xp0,
        )
    }

    pub fn to_json(&self) -> String {
        let doc = json!({
            "A": self.a,
            "B": self.b,
            "C": self.c,
            "xp0": self.xp0.entries().iter().map(format_rational).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

/// A stable reference loop used for the quantization experiments: a
/// marginally stable second-order plant under a two-state rational
/// controller (closed-loop spectral radius about 0.865).
pub fn reference_loop() -> (PlantSpec, ControllerSpec) {
    let plant = PlantSpec::new(
        RatMatrix::new(2, 2, vec![int(1), frac(1, 5), int(0), frac(4, 5)]).unwrap(),
        RatMatrix::from_i64(2, 1, &[0, 1]),
        RatMatrix::from_i64(1, 2, &[1, 0]),
        RatMatrix::from_i64(2, 1, &[1, 0]),
    )
    .unwrap();
    let spec = ControllerSpec::new(
        RatMatrix::new(2, 2, vec![frac(1, 2), frac(1, 4), int(0), frac(1, 3)]).unwrap(),
        RatMatrix::new(2, 1, vec![int(1), frac(1, 2)]).unwrap(),
        RatMatrix::new(1, 2, vec![frac(1, 4), int(-1)]).unwrap(),
        RatMatrix::zeros(2, 1),
    )
    .unwrap()
    .with_name("reference");
    (plant, spec)
}

/// Controller realizations the harness can put in the loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopVariant {
    /// The original rational controller.
    Exact,
    /// Converted coordinates, exact arithmetic.
    ConvertedExact,
    /// Lifted converted controller with period `k`, exact arithmetic.
    IntermittentExact(u32),
    /// Integer runtime with per-step re-encryption.
    Converted(QuantParams),
    /// Same, with the output matrix also scaled by `1/s`.
    ConvertedDoubleScaled(QuantParams),
    /// Integer runtime re-encrypting every `k` steps.
    Intermittent(u32, QuantParams),
}

impl LoopVariant {
    pub fn label(&self) -> String {
        let q =
            |q: &QuantParams| format!("r={},s={}", format_rational(&q.r), format_rational(&q.s));
        match self {
            LoopVariant::Exact => "exact".into(),
            LoopVariant::ConvertedExact => "converted-exact".into(),
            LoopVariant::IntermittentExact(k) => format!("intermittent-exact(k={k})"),
            LoopVariant::Converted(p) => format!("converted({})", q(p)),
            LoopVariant::ConvertedDoubleScaled(p) => format!("converted-double-scaled({})", q(p)),
            LoopVariant::Intermittent(k, p) => format!("intermittent(k={k},{})", q(p)),
        }
    }
}

enum LoopController {
    Plain(Box<dyn Controller>),
    Converted(Box<ConvertedRuntime>),
    Intermittent(Box<IntermittentRuntime>),
}

/// Result of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub variant: LoopVariant,
    pub y: Vec<Vec<Rational>>,
    pub u: Vec<Vec<Rational>>,
    /// Integer runtime records (empty for exact variants).
    pub records: Vec<TraceRecord>,
}

pub fn simulate_closed_loop(
    plant: &PlantSpec,
    spec: &ControllerSpec,
    variant: &LoopVariant,
    horizon: usize,
) -> Result<LoopRun> {
    plant.check_dual(spec)?;
    let x0 = spec.x0().column_values(0);
    let mut ctrl = match variant {
        LoopVariant::Exact => LoopController::Plain(Box::new(OriginalRuntime::new(spec))),
        LoopVariant::ConvertedExact => {
            let c = build_conversion(spec)?;
            LoopController::Plain(ExactSystem::Transformed(&c, &x0).runtime()?)
        }
        LoopVariant::IntermittentExact(k) => {
            let ir = build_intermittent(spec, *k)?;
            LoopController::Plain(ExactSystem::LiftedTransformed(&ir, &x0).runtime()?)
        }
        LoopVariant::Converted(q) => {
            let c = build_conversion(spec)?;
            LoopController::Converted(Box::new(ConvertedRuntime::new(&c, q, &x0)?))
        }
        LoopVariant::ConvertedDoubleScaled(q) => {
            let c = build_conversion(spec)?;
            LoopController::Converted(Box::new(ConvertedRuntime::with_scaling(
                &c,
                q,
                &x0,
                OutputScaling::DoubleScaled,
            )?))
        }
        LoopVariant::Intermittent(k, q) => {
            let ir = build_intermittent(spec, *k)?;
            LoopController::Intermittent(Box::new(IntermittentRuntime::new(&ir, q, &x0)?))
        }
    };
    let mut xp = plant.xp0.column_values(0);
    let mut run = LoopRun {
        variant: variant.clone(),
        y: Vec::with_capacity(horizon),
        u: Vec::with_capacity(horizon),
        records: Vec::new(),
    };
    for _ in 0..horizon {
        let y = plant.c.mul_vec(&xp)?;
        let u = match &mut ctrl {
            LoopController::Plain(c) => c.step(&y)?,
            LoopController::Converted(c) => {
                let rec = c.step_record(&y)?;
                let u = rec.u_hat.clone();
                run.records.push(rec);
                u
            }
            LoopController::Intermittent(c) => {
                let rec = c.step_record(&y)?;
                let u = rec.u_hat.clone();
                run.records.push(rec);
                u
            }
        };
        let mut next = plant.a.mul_vec(&xp)?;
        for (a, b) in next.iter_mut().zip(plant.b.mul_vec(&u)?) {
            *a += b;
        }
        xp = next;
        run.y.push(y);
        run.u.push(u);
    }
    Ok(run)
}

/// Largest component-wise difference between two signal sequences.
pub fn max_signal_error(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Rational {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(Rational::zero(), |acc, v| acc.max(v))
}

/// One row of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    /// Max `|u - u_baseline|` over the run, exact.
    pub max_error: String,
    pub max_error_f: f64,
    /// Scalar multiplications by plaintext entries outside {0, 1}, per step.
    pub mults_per_step: f64,
    pub required_bits: Option<u64>,
    pub reenc_count: u64,
    /// Whether the sandbox replay overflowed its modulus.
    pub wraparound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "comparison")]
pub struct ComparisonReport {
    pub horizon: usize,
    pub variants: Vec<VariantReport>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs the exact baseline and every requested variant in closed loop.
/// Quantized variants are replayed in the sandbox (with a modulus two bits
/// wider than the observed range, or `modulus_bits` when given) to measure
/// operation and re-encryption counts.
pub fn compare_variants(
    plant: &PlantSpec,
    spec: &ControllerSpec,
    variants: &[LoopVariant],
    horizon: usize,
    modulus_bits: Option<u64>,
) -> Result<(ComparisonReport, Vec<LoopRun>)> {
    let baseline = simulate_closed_loop(plant, spec, &LoopVariant::Exact, horizon)?;
    let mut rows = vec![VariantReport {
        variant: LoopVariant::Exact.label(),
        max_error: "0".into(),
        max_error_f: 0.0,
        mults_per_step: dense_mults(spec),
        required_bits: None,
        reenc_count: 0,
        wraparound: None,
    }];
    let mut runs = Vec::with_capacity(variants.len());
    for variant in variants.iter().filter(|v| **v != LoopVariant::Exact) {
        let run = simulate_closed_loop(plant, spec, variant, horizon)?;
        let err = max_signal_error(&run.u, &baseline.u);
        let mut row = measure(spec, variant, &run, modulus_bits)?;
        row.max_error = format_rational(&err);
        row.max_error_f = to_f64(&err);
        rows.push(row);
        runs.push(run);
    }
    runs.insert(0, baseline);
    Ok((
        ComparisonReport {
            horizon,
            variants: rows,
        },
        runs,
    ))
}

fn dense_mults(spec: &ControllerSpec) -> f64 {
    let (n, m, p) = (spec.n(), spec.m(), spec.p());
    (n * n + n * p + m * n) as f64
}

fn measure(
    spec: &ControllerSpec,
    variant: &LoopVariant,
    run: &LoopRun,
    modulus_bits: Option<u64>,
) -> Result<VariantReport> {
    let horizon = run.y.len();
    let x0 = spec.x0().column_values(0);
    let mut row = VariantReport {
        variant: variant.label(),
        max_error: "0".into(),
        max_error_f: 0.0,
        mults_per_step: dense_mults(spec),
        required_bits: None,
        reenc_count: 0,
        wraparound: None,
    };
    let mut sandboxed = |sv: SandboxVariant<'_>| -> Result<()> {
        let bits = range_report(&run.records)?.required_bits;
        let modulus = ModulusConfig::from_bits(modulus_bits.unwrap_or(bits + 1))?;
        let st = run_sandboxed(&sv, &modulus, &x0, &run.y, horizon)?;
        row.mults_per_step = st.pmult_count as f64 / horizon.max(1) as f64;
        row.required_bits = Some(bits);
        row.reenc_count = st.reenc_count;
        row.wraparound = Some(st.wraparound_detected);
        Ok(())
    };
    match variant {
        LoopVariant::Exact => {}
        LoopVariant::ConvertedExact => row.reenc_count = horizon as u64,
        LoopVariant::IntermittentExact(k) => row.reenc_count = horizon.div_ceil(*k as usize) as u64,
        LoopVariant::Converted(q) => {
            let c = build_conversion(spec)?;
            sandboxed(SandboxVariant::Converted(&c, q.clone()))?;
        }
        LoopVariant::ConvertedDoubleScaled(_) => {
            let (n, m, p) = (spec.n(), spec.m(), spec.p());
            row.mults_per_step = (n * p + n * m + m * n) as f64;
            row.required_bits = Some(range_report(&run.records)?.required_bits);
            row.reenc_count = horizon as u64;
        }
        LoopVariant::Intermittent(k, q) => {
            let ir = build_intermittent(spec, *k)?;
            sandboxed(SandboxVariant::Intermittent(&ir, q.clone()))?;
        }
    }
    Ok(row)
}

/// Auto-regressive form `u(t) = sum a_i u(t-i) + sum B_i y(t-i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxModel {
    pub order: usize,
    #[serde(with = "rational_vec")]
    pub a: Vec<Rational>,
    pub b: Vec<RatMatrix>,
}

mod rational_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::ratmath::{format_rational, rational_from_json, Rational};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(format_rational)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<serde_json::Value>::deserialize(d)?
            .iter()
            .map(|v| rational_from_json(v).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Eliminates the state with the characteristic polynomial of `F`.
pub fn arx_from_ss(spec: &ControllerSpec) -> Result<ArxModel> {
    let (f, g, h) = (spec.f(), spec.g(), spec.h());
    let n = spec.n();
    let rho = char_poly(f)?;
    let a = (1..=n).map(|i| -rho.coeff(n - i)).collect();
    let mut b = Vec::with_capacity(n);
    // acc_i = F^(i-1) + c_(n-1) F^(i-2) + ... + c_(n-i+1) I
    let mut acc = RatMatrix::identity(n);
    for i in 1..=n {
        if i > 1 {
            acc = f
                .try_mul(&acc)?
                .try_add(&RatMatrix::identity(n).scale(&rho.coeff(n - i + 1)))?;
        }
        b.push(h.try_mul(&acc)?.try_mul(g)?);
    }
    Ok(ArxModel { order: n, a, b })
}

impl ArxModel {
    /// Runs the recursion. The first `order` outputs are taken from `seed`.
    pub fn run(
        &self,
        seed: &[Vec<Rational>],
        inputs: &[Vec<Rational>],
        horizon: usize,
    ) -> Result<Vec<Vec<Rational>>> {
        let n = self.order;
        if seed.len() < n.min(horizon) || inputs.len() < horizon {
            return dim_err("ARX run needs `order` seed outputs and one input per step");
        }
        let mut out: Vec<Vec<Rational>> = seed[..n.min(horizon)].to_vec();
        for t in n..horizon {
            let m = out[t - 1].len();
            let mut u = vec![Rational::zero(); m];
            for i in 1..=n {
                for (acc, v) in u.iter_mut().zip(&out[t - i]) {
                    *acc += &self.a[i - 1] * v;
                }
                for (acc, v) in u.iter_mut().zip(self.b[i - 1].mul_vec(&inputs[t - i])?) {
                    *acc += v;
                }
            }
            out.push(u);
        }
        Ok(out)
    }
}

/// Per-step scalar multiplication counts by dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// `sum B_i y(t-i)`: n products of m x p.
    pub arx_y: usize,
    /// `sum a_i u(t-i)` as m x m blocks.
    pub arx_u: usize,
    pub converted_y: usize,
    pub converted_u: usize,
    /// Always 0: the converted state matrix has only 0/1 entries.
    pub converted_state: usize,
    /// Always 0: the converted output matrix is `[I, 0]`.
    pub converted_output: usize,
    pub intermittent: Option<IntermittentOpCount>,
}

/// Counts for one period of the intermittent runtime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermittentOpCount {
    pub k: u32,
    pub update_y: usize,
    pub update_u: usize,
    pub output_state: usize,
    pub output_input: usize,
}

impl OpCount {
    pub fn arx_total(&self) -> usize {
        self.arx_y + self.arx_u
    }

    pub fn converted_total(&self) -> usize {
        self.converted_y + self.converted_u + self.converted_state + self.converted_output
    }
}

pub fn opcount_compare(spec: &ControllerSpec, k: Option<u32>) -> OpCount {
    let (n, m, p) = (spec.n(), spec.m(), spec.p());
    OpCount {
        n,
        m,
        p,
        arx_y: n * m * p,
        arx_u: n * m * m,
        converted_y: n * p,
        converted_u: n * m,
        converted_state: 0,
        converted_output: 0,
        intermittent: k.map(|k| {
            let kk = k as usize;
            IntermittentOpCount {
                k,
                update_y: n * kk * p,
                update_u: n * m,
                output_state: kk * m * n,
                output_input: (0..kk).map(|i| m * i * p).sum(),
            }
        }),
    }
}

/// `decades` settings starting at `base`, each one tenth of the previous in
/// the selected parameters.
pub fn sweep_settings(
    base: &QuantParams,
    decades: u32,
    refine_r: bool,
    refine_s: bool,
) -> Vec<QuantParams> {
    let ten = Rational::from_integer(10.into());
    let mut out = vec![base.clone()];
    for _ in 1..decades {
        let last = out.last().expect("nonempty");
        let r = if refine_r {
            &last.r / &ten
        } else {
            last.r.clone()
        };
        let s = if refine_s {
            &last.s / &ten
        } else {
            last.s.clone()
        };
        out.push(QuantParams { r, s });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qrt::run_exact;

    #[test]
    fn scalar_arx() {
        let spec = ControllerSpec::new(
            RatMatrix::new(1, 1, vec![frac(2, 3)]).unwrap(),
            RatMatrix::new(1, 1, vec![frac(5, 2)]).unwrap(),
            RatMatrix::new(1, 1, vec![frac(-1, 7)]).unwrap(),
            RatMatrix::new(1, 1, vec![frac(1, 2)]).unwrap(),
        )
        .unwrap();
        let arx = arx_from_ss(&spec).unwrap();
        assert_eq!(arx.a, vec![frac(2, 3)]);
        assert_eq!(arx.b[0], RatMatrix::new(1, 1, vec![frac(-5, 14)]).unwrap());
        let ys: Vec<Vec<Rational>> = (0..10).map(|t| vec![frac(t as i64 - 4, 3)]).collect();
        let exact = run_exact(&ExactSystem::Original(&spec), &ys, 10).unwrap();
        assert_eq!(arx.run(&exact, &ys, 10).unwrap(), exact);
    }

    #[test]
    fn nilpotent_arx_is_finite_memory() {
        let spec = ControllerSpec::new(
            RatMatrix::from_i64(2, 2, &[0, 1, 0, 0]),
            RatMatrix::from_i64(2, 1, &[0, 1]),
            RatMatrix::from_i64(1, 2, &[1, 1]),
            RatMatrix::zeros(2, 1),
        )
        .unwrap();
        let arx = arx_from_ss(&spec).unwrap();
        assert!(arx.a.iter().all(Zero::is_zero));
    }

    #[test]
    fn opcounts() {
        let spec = |n: usize, m: usize, p: usize| {
            ControllerSpec::new(
                RatMatrix::zeros(n, n),
                RatMatrix::zeros(n, p),
                RatMatrix::from_fn(m, n, |i, j| if i == j { int(1) } else { int(0) }),
                RatMatrix::zeros(n, 1),
            )
            .unwrap()
        };
        let c = opcount_compare(&spec(4, 2, 2), None);
        assert_eq!(
            (
                c.arx_y,
                c.arx_u,
                c.converted_y + c.converted_u,
                c.converted_u
            ),
            (16, 16, 16, 8)
        );
        assert_eq!(c.converted_state, 0);
        let c = opcount_compare(&spec(2, 1, 1), None);
        assert_eq!((c.arx_total(), c.converted_total()), (4, 4));
        let c = opcount_compare(&spec(1, 1, 1), None);
        assert_eq!(c.arx_total(), c.converted_total());
    }

    #[test]
    fn exact_variants_agree_in_closed_loop() {
        let (plant, spec) = reference_loop();
        let base = simulate_closed_loop(&plant, &spec, &LoopVariant::Exact, 25).unwrap();
        for v in [
            LoopVariant::ConvertedExact,
            LoopVariant::IntermittentExact(2),
        ] {
            let run = simulate_closed_loop(&plant, &spec, &v, 25).unwrap();
            assert_eq!(run.u, base.u);
            assert_eq!(run.y, base.y);
        }
    }

    #[test]
    fn quantized_loop_converges() {
        let (plant, spec) = reference_loop();
        let (report, _) = compare_variants(
            &plant,
            &spec,
            &[
                LoopVariant::Converted(QuantParams::decade(1)),
                LoopVariant::Converted(QuantParams::decade(3)),
            ],
            30,
            None,
        )
        .unwrap();
        assert_eq!(report.variants[0].max_error, "0");
        assert!(report.variants[2].max_error_f < report.variants[1].max_error_f);
        assert_eq!(report.variants[2].reenc_count, 30);
        let back = ComparisonReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn plant_json_round_trip() {
        let (plant, _) = reference_loop();
        assert_eq!(PlantSpec::from_json(&plant.to_json()).unwrap(), plant);
    }
}
