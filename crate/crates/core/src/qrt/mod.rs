//! Quantized integer runtimes, their exact rational references, and the
//! range bookkeeping used to size the plaintext space.

mod exact;
mod export;
mod int;
mod range;
mod runtime;

pub use exact::{
    run_exact, Controller, ExactSystem, LiftedRuntime, OriginalRuntime, ReencodedRuntime,
    TransformedRuntime,
};
pub use export::{write_trace_csv, TraceTable};
pub use int::{quantize, IntMatrix};
pub use range::{range_report, required_bits, RangeReport};
pub use runtime::{
    exact_scale, max_output_error, quant_residual, run_converted, run_intermittent_rt,
    ConvertedRuntime, InputPaths, IntermittentRuntime, OutputScaling, TraceRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratmath::rational::serde_str;
use crate::ratmath::Rational;
use num_traits::{One, Signed, Zero};

/// Quantization step `r` and scale `s` (the controller matrices are scaled by `1/s`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantParams {
    #[serde(with = "serde_str")]
    pub r: Rational,
    #[serde(with = "serde_str")]
    pub s: Rational,
}

impl QuantParams {
    /// Requires `r > 0` and `0 < s <= 1`.
    pub fn new(r: Rational, s: Rational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::Parse(format!(
                "quantization step must be positive, got {r}"
            )));
        }
        if !s.is_positive() || s > Rational::one() {
            return Err(Error::Parse(format!("scale s must lie in (0, 1], got {s}")));
        }
        Ok(Self { r, s })
    }

    /// `r = s = 10^-decades`.
    pub fn decade(decades: u32) -> Self {
        let v = Rational::new(
            1.into(),
            num_traits::pow(num_bigint::BigInt::from(10), decades as usize),
        );
        Self { r: v.clone(), s: v }
    }

    /// Both parameters divided by ten.
    pub fn refined(&self) -> Self {
        let ten = Rational::from_integer(10.into());
        Self {
            r: &self.r / &ten,
            s: &self.s / &ten,
        }
    }

    pub(crate) fn rs(&self) -> Rational {
        &self.r * &self.s
    }
}

impl Default for QuantParams {
    fn default() -> Self {
        Self {
            r: Rational::one(),
            s: Rational::one(),
        }
    }
}

pub(crate) fn max_abs(v: impl IntoIterator<Item = Rational>) -> Rational {
    v.into_iter()
        .map(|x| x.abs())
        .fold(Rational::zero(), |a, b| a.max(b))
}
