//! Mock ciphertext layer over `Z_q` that only allows addition and
//! multiplication by integer plaintext matrices. Decryption happens only at
//! the key holder, and every such round trip is logged.
//!
//! There is no cryptography here: payloads are plain residues. Wraparound is
//! detected by carrying the unbounded integer alongside each payload.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::canon::ConversionResult;
use crate::error::{dim_err, Error, Result};
use crate::intermit::IntermittentResult;
use crate::qrt::OriginalRuntime;
use crate::qrt::{
    quantize, Controller, ConvertedRuntime, IntMatrix, IntermittentRuntime, QuantParams,
    TraceRecord, TraceTable,
};
use crate::ratmath::{RatMatrix, Rational};
use crate::sysobs::ControllerSpec;

/// Plaintext modulus with centered representatives `[-floor(q/2), ceil(q/2))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulusConfig {
    q: BigInt,
}

impl ModulusConfig {
    pub fn new(q: BigInt) -> Result<Self> {
        if q < BigInt::from(2) {
            return Err(Error::Parse(format!("modulus must be at least 2, got {q}")));
        }
        Ok(Self { q })
    }

    /// `q = 2^bits`.
    pub fn from_bits(bits: u64) -> Result<Self> {
        Self::new(BigInt::one() << bits)
    }

    pub fn q(&self) -> &BigInt {
        &self.q
    }

    pub fn bits(&self) -> u64 {
        (&self.q - 1u32).bits()
    }

    pub fn reduce(&self, v: &BigInt) -> BigInt {
        let r = v.mod_floor(&self.q);
        if r >= self.upper() {
            r - &self.q
        } else {
            r
        }
    }

    pub fn contains(&self, v: &BigInt) -> bool {
        let lower: BigInt = -(&self.q / 2u32);
        *v >= lower && *v < self.upper()
    }

    fn upper(&self) -> BigInt {
        (&self.q + 1u32) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Fresh,
    Derived,
    ReEncrypted,
}

/// A vector of residues. Only the evaluator can look inside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockCiphertext {
    payload: Vec<BigInt>,
    origin: Origin,
    shadow: Vec<BigInt>,
}

impl MockCiphertext {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// Concatenation of payloads (no arithmetic, no cost).
    pub fn concat(parts: &[&MockCiphertext]) -> MockCiphertext {
        MockCiphertext {
            payload: parts
                .iter()
                .flat_map(|c| c.payload.iter().cloned())
                .collect(),
            origin: Origin::Derived,
            shadow: parts
                .iter()
                .flat_map(|c| c.shadow.iter().cloned())
                .collect(),
        }
    }
}

/// Performs the permitted operations and counts them.
#[derive(Debug, Clone)]
pub struct Evaluator {
    modulus: ModulusConfig,
    adds: u64,
    pmults: u64,
    pmult_by_path: BTreeMap<String, u64>,
    wrapped: bool,
}

impl Evaluator {
    pub fn new(modulus: ModulusConfig) -> Self {
        Self {
            modulus,
            adds: 0,
            pmults: 0,
            pmult_by_path: BTreeMap::new(),
            wrapped: false,
        }
    }

    pub fn add_count(&self) -> u64 {
        self.adds
    }

    pub fn pmult_count(&self) -> u64 {
        self.pmults
    }

    pub fn pmult_by_path(&self) -> &BTreeMap<String, u64> {
        &self.pmult_by_path
    }

    pub fn wrapped(&self) -> bool {
        self.wrapped
    }

    fn note(&mut self, v: &BigInt) {
        if !self.modulus.contains(v) {
            self.wrapped = true;
        }
    }

    pub fn encrypt(&mut self, v: &[BigInt]) -> MockCiphertext {
        v.iter().for_each(|x| self.note(x));
        MockCiphertext {
            payload: v.iter().map(|x| self.modulus.reduce(x)).collect(),
            origin: Origin::Fresh,
            shadow: v.to_vec(),
        }
    }

    pub fn decrypt(&self, ct: &MockCiphertext) -> Vec<BigInt> {
        ct.payload.clone()
    }

    pub fn add(&mut self, a: &MockCiphertext, b: &MockCiphertext) -> Result<MockCiphertext> {
        if a.len() != b.len() {
            return dim_err(format!("add: lengths {} and {}", a.len(), b.len()));
        }
        self.adds += a.len() as u64;
        let shadow: Vec<BigInt> = a.shadow.iter().zip(&b.shadow).map(|(x, y)| x + y).collect();
        shadow.iter().for_each(|x| self.note(x));
        Ok(MockCiphertext {
            payload: a
                .payload
                .iter()
                .zip(&b.payload)
                .map(|(x, y)| self.modulus.reduce(&(x + y)))
                .collect(),
            origin: Origin::Derived,
            shadow,
        })
    }

    /// Multiplies by an integer plaintext matrix. A matrix with only 0/1
    /// entries is applied by selection and addition; anything else costs one
    /// scalar multiply-accumulate per entry.
    pub fn plaintext_mult(
        &mut self,
        m: &RatMatrix,
        ct: &MockCiphertext,
        path: &str,
    ) -> Result<MockCiphertext> {
        let plain = IntMatrix::from_exact(m, path)?;
        self.int_mult(&plain, ct, path)
    }

    pub fn int_mult(
        &mut self,
        m: &IntMatrix,
        ct: &MockCiphertext,
        path: &str,
    ) -> Result<MockCiphertext> {
        if m.cols() != ct.len() {
            return dim_err(format!(
                "{path}: {}x{} times length {}",
                m.rows(),
                m.cols(),
                ct.len()
            ));
        }
        if m.is_binary() {
            let ones = m.entries().iter().filter(|v| v.is_one()).count() as u64;
            self.adds += ones.saturating_sub(m.rows() as u64);
        } else {
            let macs = (m.rows() * m.cols()) as u64;
            self.pmults += macs;
            *self.pmult_by_path.entry(path.to_string()).or_default() += macs;
            self.adds += (m.rows() * m.cols().saturating_sub(1)) as u64;
        }
        let mut payload = Vec::with_capacity(m.rows());
        let mut shadow = Vec::with_capacity(m.rows());
        for i in 0..m.rows() {
            let mut acc = BigInt::zero();
            let mut exact = BigInt::zero();
            for j in 0..m.cols() {
                let a = m.get(i, j);
                if a.is_zero() {
                    continue;
                }
                acc = self.modulus.reduce(&(acc + a * &ct.payload[j]));
                exact += a * &ct.shadow[j];
                self.note(&exact);
            }
            payload.push(acc);
            shadow.push(exact);
        }
        Ok(MockCiphertext {
            payload,
            origin: Origin::Derived,
            shadow,
        })
    }

    /// Key-holder round trip: decrypt, recover the real output, requantize
    /// and return a fresh ciphertext together with the recovered value.
    pub fn reencrypt(
        &mut self,
        ct: &MockCiphertext,
        recover: impl Fn(&[BigInt]) -> Vec<Rational>,
        step: &Rational,
    ) -> (MockCiphertext, Vec<Rational>) {
        let u_hat = recover(&self.decrypt(ct));
        let u_bar = quantize(&u_hat, step);
        let mut fresh = self.encrypt(&u_bar);
        fresh.origin = Origin::ReEncrypted;
        (fresh, u_hat)
    }
}

/// What to run inside the sandbox.
#[derive(Debug, Clone)]
pub enum SandboxVariant<'a> {
    Converted(&'a ConversionResult, QuantParams),
    Intermittent(&'a IntermittentResult, QuantParams),
    /// The original controller with unit quantization; refused unless all
    /// of its matrices are integral.
    Raw(&'a ControllerSpec),
}

/// One step as seen through decryption, with the counter deltas of the step.
#[derive(Debug, Clone, PartialEq)]
pub struct SandboxRecord {
    pub record: TraceRecord,
    pub adds: u64,
    pub pmults: u64,
    pub reencs: u64,
    pub wrap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandboxTrace {
    pub records: Vec<SandboxRecord>,
    pub add_count: u64,
    pub pmult_count: u64,
    pub pmult_by_path: BTreeMap<String, u64>,
    pub reenc_count: u64,
    pub key_access_times: Vec<usize>,
    pub wraparound_detected: bool,
    pub modulus_bits: u64,
}

/// Serializable digest of a sandbox run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxSummary {
    pub horizon: usize,
    pub modulus_bits: u64,
    pub add_count: u64,
    pub pmult_count: u64,
    pub pmult_by_path: BTreeMap<String, u64>,
    pub reenc_count: u64,
    pub key_access_times: Vec<usize>,
    pub wraparound_detected: bool,
}

impl SandboxTrace {
    /// Whether the decrypted signals equal a plain integer trace bit for bit.
    pub fn matches(&self, plain: &[TraceRecord]) -> bool {
        self.records.len() == plain.len()
            && self.records.iter().zip(plain).all(|(s, p)| {
                s.record.z_bar == p.z_bar && s.record.u_z == p.u_z && s.record.u_hat == p.u_hat
            })
    }

    pub fn plain_records(&self) -> Vec<TraceRecord> {
        self.records.iter().map(|r| r.record.clone()).collect()
    }

    pub fn summary(&self) -> SandboxSummary {
        SandboxSummary {
            horizon: self.records.len(),
            modulus_bits: self.modulus_bits,
            add_count: self.add_count,
            pmult_count: self.pmult_count,
            pmult_by_path: self.pmult_by_path.clone(),
            reenc_count: self.reenc_count,
            key_access_times: self.key_access_times.clone(),
            wraparound_detected: self.wraparound_detected,
        }
    }

    pub fn table(&self) -> TraceTable {
        let mut table = TraceTable::from_records(&self.plain_records());
        let col =
            |f: &dyn Fn(&SandboxRecord) -> String| self.records.iter().map(f).collect::<Vec<_>>();
        for (name, values) in [
            ("adds", col(&|r| r.adds.to_string())),
            ("pmults", col(&|r| r.pmults.to_string())),
            ("reencs", col(&|r| r.reencs.to_string())),
            ("wrap", col(&|r| r.wrap.to_string())),
        ] {
            table.push_column(name, values).expect("one value per row");
        }
        table
    }
}

struct Recorder {
    records: Vec<SandboxRecord>,
    key_access_times: Vec<usize>,
    last: (u64, u64),
}

impl Recorder {
    fn push(&mut self, ev: &Evaluator, record: TraceRecord, reenc: bool) {
        if reenc {
            self.key_access_times.push(record.t);
        }
        let (adds, pmults) = (ev.add_count(), ev.pmult_count());
        self.records.push(SandboxRecord {
            record,
            adds: adds - self.last.0,
            pmults: pmults - self.last.1,
            reencs: reenc as u64,
            wrap: ev.wrapped(),
        });
        self.last = (adds, pmults);
    }
}

fn to_int_vec(v: &[Rational], name: &str) -> Result<Vec<BigInt>> {
    v.iter()
        .map(|x| {
            if x.is_integer() {
                Ok(x.to_integer())
            } else {
                Err(Error::NonIntegerPlaintext(name.to_string()))
            }
        })
        .collect()
}

fn range_of(v: &[BigInt]) -> (BigInt, BigInt) {
    (
        v.iter().min().cloned().unwrap_or_default(),
        v.iter().max().cloned().unwrap_or_default(),
    )
}

/// Runs a controller inside the sandbox. The plain integer runtime runs
/// alongside to supply the exact reference output and residuals; every
/// integer signal in the returned records comes from decryption.
pub fn run_sandboxed(
    variant: &SandboxVariant<'_>,
    modulus: &ModulusConfig,
    x0: &[Rational],
    inputs: &[Vec<Rational>],
    horizon: usize,
) -> Result<SandboxTrace> {
    if inputs.len() < horizon {
        return dim_err(format!("{} inputs for horizon {horizon}", inputs.len()));
    }
    let mut ev = Evaluator::new(modulus.clone());
    let mut rec = Recorder {
        records: Vec::with_capacity(horizon),
        key_access_times: Vec::new(),
        last: (0, 0),
    };
    match variant {
        SandboxVariant::Converted(c, q) => {
            run_converted_ct(c, q, x0, &inputs[..horizon], &mut ev, &mut rec)?
        }
        SandboxVariant::Intermittent(ir, q) => {
            run_intermittent_ct(ir, q, x0, &inputs[..horizon], &mut ev, &mut rec)?
        }
        SandboxVariant::Raw(spec) => run_raw_ct(spec, &inputs[..horizon], &mut ev, &mut rec)?,
    }
    Ok(SandboxTrace {
        add_count: ev.add_count(),
        pmult_count: ev.pmult_count(),
        pmult_by_path: ev.pmult_by_path().clone(),
        reenc_count: rec.key_access_times.len() as u64,
        key_access_times: rec.key_access_times,
        records: rec.records,
        wraparound_detected: ev.wrapped(),
        modulus_bits: modulus.bits(),
    })
}

fn run_converted_ct(
    c: &ConversionResult,
    q: &QuantParams,
    x0: &[Rational],
    inputs: &[Vec<Rational>],
    ev: &mut Evaluator,
    rec: &mut Recorder,
) -> Result<()> {
    let mut plain = ConvertedRuntime::new(c, q, x0)?;
    let mut ct_z = ev.encrypt(plain.state());
    for y in inputs {
        let z_bar = ev.decrypt(&ct_z);
        let ct_u = ev.int_mult(plain.output_matrix(), &ct_z, "output")?;
        let u_z = ev.decrypt(&ct_u);
        let (ct_ubar, u_hat) =
            ev.reencrypt(&ct_u, |v| plain.recover_output(v).expect("shape"), &q.r);
        let ct_y = ev.encrypt(&quantize(y, &q.r));
        let a = ev.int_mult(plain.state_matrix(), &ct_z, "state")?;
        let b = ev.int_mult(plain.input_y(), &ct_y, "input_y")?;
        let u = ev.int_mult(plain.input_u(), &ct_ubar, "input_u")?;
        let ab = ev.add(&a, &b)?;
        ct_z = ev.add(&ab, &u)?;

        let mut record = plain.step_record(y)?;
        record.z_bar_range = range_of(&z_bar);
        record.z_bar = z_bar;
        record.u_z = u_z;
        record.u_bar = Some(ev.decrypt(&ct_ubar));
        record.u_hat = u_hat;
        rec.push(ev, record, true);
    }
    Ok(())
}

fn run_intermittent_ct(
    ir: &IntermittentResult,
    q: &QuantParams,
    x0: &[Rational],
    inputs: &[Vec<Rational>],
    ev: &mut Evaluator,
    rec: &mut Recorder,
) -> Result<()> {
    let mut plain = IntermittentRuntime::new(ir, q, x0)?;
    let k = plain.period();
    let mut ct_z = ev.encrypt(plain.state());
    let mut ct_ys: Vec<MockCiphertext> = Vec::with_capacity(k);
    let mut ct_ubar = ev.encrypt(&[]);
    for (t, y) in inputs.iter().enumerate() {
        let phase = t % k;
        let z_bar = ev.decrypt(&ct_z);
        let mut ct_u = ev.int_mult(plain.out_state(phase), &ct_z, "output_state")?;
        if phase > 0 {
            let ybuf = MockCiphertext::concat(&ct_ys.iter().collect::<Vec<_>>());
            let d = ev.int_mult(plain.out_input(phase), &ybuf, "output_input")?;
            ct_u = ev.add(&ct_u, &d)?;
        }
        let u_z = ev.decrypt(&ct_u);
        let reenc = phase == 0;
        let u_hat = if reenc {
            let (fresh, u_hat) = ev.reencrypt(&ct_u, |v| plain.recover_output(v), &q.r);
            ct_ubar = fresh;
            u_hat
        } else {
            plain.recover_output(&u_z)
        };
        ct_ys.push(ev.encrypt(&quantize(y, &q.r)));
        if phase + 1 == k {
            let ybuf = MockCiphertext::concat(&ct_ys.iter().collect::<Vec<_>>());
            let a = ev.int_mult(plain.state_matrix(), &ct_z, "state")?;
            let b = ev.int_mult(plain.input_y(), &ybuf, "input_y")?;
            let u = ev.int_mult(plain.input_u(), &ct_ubar, "input_u")?;
            let ab = ev.add(&a, &b)?;
            ct_z = ev.add(&ab, &u)?;
            ct_ys.clear();
        }

        let mut record = plain.step_record(y)?;
        record.z_bar_range = range_of(&z_bar);
        record.z_bar = z_bar;
        record.u_z = u_z;
        if reenc {
            record.u_bar = Some(ev.decrypt(&ct_ubar));
        }
        record.u_hat = u_hat;
        rec.push(ev, record, reenc);
    }
    Ok(())
}

fn run_raw_ct(
    spec: &ControllerSpec,
    inputs: &[Vec<Rational>],
    ev: &mut Evaluator,
    rec: &mut Recorder,
) -> Result<()> {
    let f = IntMatrix::from_exact(spec.f(), "F")?;
    let g = IntMatrix::from_exact(spec.g(), "G")?;
    let h = IntMatrix::from_exact(spec.h(), "H")?;
    let one = Rational::one();
    let x0 = spec.x0().column_values(0);
    let mut ct_x = ev.encrypt(&to_int_vec(&x0, "x0")?);
    let mut reference = OriginalRuntime::new(spec);
    for (t, y) in inputs.iter().enumerate() {
        let x_bar = ev.decrypt(&ct_x);
        let ct_u = ev.int_mult(&h, &ct_x, "output")?;
        let (_, u_hat) = ev.reencrypt(
            &ct_u,
            |v| v.iter().cloned().map(Rational::from_integer).collect(),
            &one,
        );
        let y_bar = quantize(y, &one);
        let ct_y = ev.encrypt(&y_bar);
        let a = ev.int_mult(&f, &ct_x, "state")?;
        let b = ev.int_mult(&g, &ct_y, "input_y")?;
        ct_x = ev.add(&a, &b)?;
        let u_exact = reference.step(y)?;
        let record = TraceRecord {
            t,
            y: y.clone(),
            u_exact,
            u_z: ev.decrypt(&ct_u),
            u_hat,
            residual_norm: Rational::zero(),
            z_bar_range: range_of(&x_bar),
            z_bar: x_bar,
            y_bar,
            u_bar: None,
            reencrypted: true,
            peaks: BTreeMap::new(),
        };
        rec.push(ev, record, true);
    }
    Ok(())
}
