//! Exact rational scalars, dense matrices and univariate polynomials.
//!
//! Nothing in here touches floating point except the explicit `to_f64`
//! conversions used for reporting.

pub mod matrix;
pub mod poly;
pub mod rational;

pub use matrix::{matrix_from_json, RatMatrix};
pub use poly::{char_poly, resultant, RatPoly};
pub use rational::{
    format_rational, frac, int, parse_rational, rational_from_json, round_half_away, Rational,
};
