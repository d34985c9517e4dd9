//! Scalar helpers around [`num_rational::BigRational`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar, always stored in lowest terms with a positive denominator.
pub type Rational = num_rational::BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Renders `p/q`, or `p` when the denominator is one.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `p`, `p/q`, or a finite decimal such as `-0.125`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, fracpart)) = s.split_once('.') {
        if fracpart.is_empty() || !fracpart.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole = whole.trim_start_matches(['-', '+']);
        let whole: BigInt = if whole.is_empty() {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let digits: BigInt = fracpart.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), fracpart.len());
        let mag = Rational::new(whole * &scale + digits, scale);
        return Ok(if negative { -mag } else { mag });
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

/// Nearest integer, ties rounded away from zero.
pub fn round_half_away(x: &Rational) -> BigInt {
    x.round().to_integer()
}

pub fn is_integer(x: &Rational) -> bool {
    x.denom().is_one()
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator or denominator too large for a direct conversion
        let n = x.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = x.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

pub fn abs(x: &Rational) -> Rational {
    x.abs()
}

/// Least common multiple of the denominators of `values` (1 for an empty input).
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

pub(crate) mod serde_str {
    use super::{format_rational, Rational};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        super::rational_from_json(&v).map_err(de::Error::custom)
    }
}

/// Accepts a JSON string (`"p/q"`, `"p"`, decimal) or a JSON integer.
pub fn rational_from_json(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(int(i))
            } else if let Some(u) = n.as_u64() {
                Ok(Rational::from_integer(BigInt::from(u)))
            } else {
                // binary floats are rejected; exact values must be strings
                Err(Error::Parse(format!(
                    "non-integer JSON number {n}; write it as a rational string"
                )))
            }
        }
        other => Err(Error::Parse(format!("expected rational, found {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_lowest_terms() {
        assert_eq!(format_rational(&frac(4, -6)), "-2/3");
        assert_eq!(format_rational(&frac(8, 4)), "2");
        assert_eq!(format_rational(&int(0)), "0");
    }

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("3/6").unwrap(), frac(1, 2));
        assert_eq!(parse_rational(" -7 ").unwrap(), int(-7));
        assert_eq!(parse_rational("0.125").unwrap(), frac(1, 8));
        assert_eq!(parse_rational("-0.5").unwrap(), frac(-1, 2));
        assert_eq!(parse_rational("-.5").unwrap(), frac(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn rounding_ties_away_from_zero() {
        assert_eq!(round_half_away(&frac(1, 2)), BigInt::from(1));
        assert_eq!(round_half_away(&frac(-1, 2)), BigInt::from(-1));
        assert_eq!(round_half_away(&frac(-70, 3)), BigInt::from(-23));
        assert_eq!(round_half_away(&frac(5, 2)), BigInt::from(3));
    }

    #[test]
    fn json_numbers() {
        assert_eq!(rational_from_json(&serde_json::json!(3)).unwrap(), int(3));
        assert!(rational_from_json(&serde_json::json!(0.5)).is_err());
    }
}
