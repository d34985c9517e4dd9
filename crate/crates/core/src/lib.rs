//! Conversion of linear dynamic controllers into forms that run on integer
//! addition and multiplication only, as required by homomorphic encryption.
//!
//! The pipeline:
//!
//! * [`sysobs`] checks observability of `(F, H)` and reduces unobservable controllers.
//! * [`canon`] builds `T`, `R`, `T_u` so that `T(F - RH)T^-1` and `T_u H T^-1`
//!   are `{0,1}` matrices.
//! * [`intermit`] does the same for the `k`-step lifted controller, so
//!   re-encryption is needed only every `k`-th sample.
//! * [`qrt`] runs the quantized integer controllers next to exact references.
//! * [`sandbox`] replays the integer controllers over `Z_q` with only
//!   ciphertext addition and plaintext multiplication available.
//! * [`sim`] closes the loop around a plant, builds the ARX baseline and
//!   handles the document formats used by the `ictrl` binary.

pub mod canon;
pub mod error;
pub mod intermit;
pub mod qrt;
pub mod ratmath;
pub mod sandbox;
pub mod sim;
pub mod sysobs;

pub use error::{Error, Result};
pub use ratmath::{RatMatrix, RatPoly, Rational};
