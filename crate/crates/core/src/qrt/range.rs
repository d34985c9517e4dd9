use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::int::raise;
use super::runtime::TraceRecord;
use crate::error::{Error, Result};

/// Signed width needed for the integers seen over a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeReport {
    #[serde(with = "bigint_str")]
    pub max_abs: BigInt,
    /// Smallest `b` with `max_abs < 2^(b-1)`.
    pub required_bits: u64,
    #[serde(with = "bigint_map")]
    pub per_signal: BTreeMap<String, BigInt>,
}

/// Smallest `b` such that every integer of magnitude at most `max_abs` is a
/// centered residue modulo `2^b`.
pub fn required_bits(max_abs: &BigInt) -> u64 {
    max_abs.magnitude().bits() + 1
}

pub fn range_report(trace: &[TraceRecord]) -> Result<RangeReport> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut per_signal: BTreeMap<String, BigInt> = BTreeMap::new();
    for rec in trace {
        for (name, v) in &rec.peaks {
            raise(per_signal.entry((*name).to_string()).or_default(), v);
        }
    }
    let mut max_abs = BigInt::zero();
    for v in per_signal.values() {
        raise(&mut max_abs, v);
    }
    Ok(RangeReport {
        required_bits: required_bits(&max_abs),
        max_abs,
        per_signal,
    })
}

mod bigint_str {
    use num_bigint::BigInt;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

mod bigint_map {
    use std::collections::BTreeMap;

    use num_bigint::BigInt;
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, BigInt>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, BigInt>, D::Error> {
        BTreeMap::<String, String>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| v.parse().map(|v| (k, v)).map_err(de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(z: &[i64]) -> TraceRecord {
        let z: Vec<BigInt> = z.iter().map(|&v| BigInt::from(v)).collect();
        let mut peak = BigInt::zero();
        z.iter().for_each(|v| raise(&mut peak, v));
        TraceRecord {
            t: 0,
            y: vec![],
            u_exact: vec![],
            u_hat: vec![],
            residual_norm: Default::default(),
            z_bar_range: Default::default(),
            z_bar: z,
            y_bar: vec![],
            u_z: vec![],
            u_bar: None,
            reencrypted: false,
            peaks: BTreeMap::from([("z_bar", peak)]),
        }
    }

    #[test]
    fn width_examples() {
        assert_eq!(required_bits(&BigInt::zero()), 1);
        assert_eq!(required_bits(&BigInt::from(1)), 2);
        assert_eq!(required_bits(&BigInt::from(127)), 8);
        assert_eq!(required_bits(&BigInt::from(128)), 9);
    }

    #[test]
    fn reports() {
        assert_eq!(range_report(&[]), Err(Error::EmptyTrace));
        let r = range_report(&[record(&[0, 0])]).unwrap();
        assert_eq!((r.max_abs.clone(), r.required_bits), (BigInt::zero(), 1));
        let r = range_report(&[record(&[5, -9])]).unwrap();
        assert!(r.max_abs >= BigInt::from(9));
        let back: RangeReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
