mod common;

use ictrl::canon::{build_conversion, ConversionResult};
use ictrl::intermit::{build_intermittent, suggest_period, IntermittentResult};
use ictrl::qrt::{
    exact_scale, range_report, run_converted, run_exact, run_intermittent_rt, ExactSystem,
    IntMatrix, QuantParams, RangeReport,
};
use ictrl::ratmath::rational::denominator_lcm;
use ictrl::ratmath::{frac, RatMatrix, Rational};
use ictrl::sandbox::{run_sandboxed, ModulusConfig, SandboxSummary, SandboxVariant};
use ictrl::sim::{arx_from_ss, opcount_compare, ArxModel, OpCount};
use ictrl::sysobs::ControllerSpec;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

use common::{random_inputs, random_spec, rng};

const HORIZON: usize = 16;

struct Case {
    spec: ControllerSpec,
    x0: Vec<Rational>,
    ys: Vec<Vec<Rational>>,
}

fn case(seed: u64, n_max: usize) -> Case {
    let mut r = rng(seed);
    let spec = random_spec(&mut r, n_max, 2, 2);
    let ys = random_inputs(&mut r, spec.p(), HORIZON);
    let x0 = spec.x0().column_values(0);
    Case { spec, x0, ys }
}

/// `r = 1/L` with `L` clearing every denominator of the exact signals and of `T x0 / s`.
fn exact_r(case: &Case, t: &RatMatrix, s: &Rational) -> Rational {
    let us = run_exact(&ExactSystem::Original(&case.spec), &case.ys, HORIZON).unwrap();
    let z0: Vec<Rational> = t
        .mul_vec(&case.x0)
        .unwrap()
        .into_iter()
        .map(|v| v / s)
        .collect();
    let all = case
        .ys
        .iter()
        .flatten()
        .chain(us.iter().flatten())
        .chain(z0.iter());
    Rational::new(BigInt::one(), denominator_lcm(all))
}

fn exactness_holds(trace: &[ictrl::qrt::TraceRecord]) -> bool {
    trace
        .iter()
        .all(|rec| rec.u_hat == rec.u_exact && rec.residual_norm.is_zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn converted_is_exact_at_clearing_scales(seed in any::<u64>()) {
        let c = case(seed, 4);
        let conv = build_conversion(&c.spec).unwrap();
        let s = exact_scale(&[&conv.b_y, &conv.b_u]);
        let r = exact_r(&c, &conv.t, &s);
        let q = QuantParams::new(r, s).unwrap();
        let trace = run_converted(&conv, &q, &c.x0, &c.ys, HORIZON).unwrap();
        prop_assert!(exactness_holds(&trace));
    }

    #[test]
    fn intermittent_is_exact_at_clearing_scales(seed in any::<u64>()) {
        let c = case(seed, 4);
        let k = suggest_period(c.spec.f(), 2).unwrap();
        let ir = build_intermittent(&c.spec, k).unwrap();
        let mut mats: Vec<&RatMatrix> = vec![&ir.b_y, &ir.b_u];
        mats.extend(ir.out_state.iter());
        mats.extend(ir.out_input.iter());
        let s = exact_scale(&mats);
        let r = exact_r(&c, &ir.t, &s);
        let q = QuantParams::new(r, s).unwrap();
        let trace = run_intermittent_rt(&ir, &q, &c.x0, &c.ys, HORIZON).unwrap();
        prop_assert!(exactness_holds(&trace));
    }

    #[test]
    fn sandbox_reproduces_plain_runtime(seed in any::<u64>(), decade in 1u32..=3) {
        let c = case(seed, 4);
        let q = QuantParams::decade(decade);
        let conv = build_conversion(&c.spec).unwrap();
        let plain = run_converted(&conv, &q, &c.x0, &c.ys, HORIZON).unwrap();
        let bits = range_report(&plain).unwrap().required_bits;
        let modulus = ModulusConfig::from_bits(bits + 1).unwrap();
        let ct = run_sandboxed(&SandboxVariant::Converted(&conv, q.clone()), &modulus, &c.x0, &c.ys, HORIZON).unwrap();
        prop_assert!(ct.matches(&plain));
        prop_assert!(!ct.wraparound_detected);
        prop_assert_eq!(ct.reenc_count, HORIZON as u64);

        let k = suggest_period(c.spec.f(), 2).unwrap();
        let ir = build_intermittent(&c.spec, k).unwrap();
        let plain = run_intermittent_rt(&ir, &q, &c.x0, &c.ys, HORIZON).unwrap();
        let bits = range_report(&plain).unwrap().required_bits;
        let modulus = ModulusConfig::from_bits(bits + 1).unwrap();
        let ct = run_sandboxed(&SandboxVariant::Intermittent(&ir, q), &modulus, &c.x0, &c.ys, HORIZON).unwrap();
        prop_assert!(ct.matches(&plain));
        prop_assert!(!ct.wraparound_detected);
        prop_assert_eq!(ct.reenc_count as usize, HORIZON.div_ceil(k as usize));
        let expected: Vec<usize> = (0..HORIZON).step_by(k as usize).collect();
        prop_assert_eq!(ct.key_access_times, expected);
    }

    #[test]
    fn sandbox_multiplications_follow_dimensions(seed in any::<u64>()) {
        let c = case(seed, 5);
        let conv = build_conversion(&c.spec).unwrap();
        let q = QuantParams::decade(2);
        let ct = run_sandboxed(&SandboxVariant::Converted(&conv, q), &ModulusConfig::from_bits(256).unwrap(), &c.x0, &c.ys, HORIZON).unwrap();
        let ops = opcount_compare(&c.spec, None);
        let per_path = |p: &str| ct.pmult_by_path.get(p).copied().unwrap_or(0) as usize;
        prop_assert_eq!(per_path("state"), 0);
        prop_assert_eq!(per_path("output"), 0);
        // a 0/1 input matrix costs no multiplications at all
        for (path, scaled, count) in [("input_y", &conv.b_y, ops.converted_y), ("input_u", &conv.b_u, ops.converted_u)] {
            if IntMatrix::scaled(scaled, &frac(1, 100)).0.is_binary() {
                prop_assert_eq!(per_path(path), 0);
            } else {
                prop_assert_eq!(per_path(path), count * HORIZON);
            }
        }
    }

    #[test]
    fn arx_form_matches_state_space(seed in any::<u64>()) {
        let c = case(seed, 5);
        let us = run_exact(&ExactSystem::Original(&c.spec), &c.ys, HORIZON).unwrap();
        let arx = arx_from_ss(&c.spec).unwrap();
        prop_assert_eq!(arx.order, c.spec.n());
        prop_assert_eq!(arx.run(&us, &c.ys, HORIZON).unwrap(), us);
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let c = case(seed, 4);
        prop_assert_eq!(&ControllerSpec::from_json(&c.spec.to_json()).unwrap(), &c.spec);
        let conv = build_conversion(&c.spec).unwrap();
        prop_assert_eq!(&ConversionResult::from_json(&conv.to_json()).unwrap(), &conv);
        let k = suggest_period(c.spec.f(), 2).unwrap();
        let ir = build_intermittent(&c.spec, k).unwrap();
        prop_assert_eq!(&IntermittentResult::from_json(&ir.to_json()).unwrap(), &ir);

        let arx = arx_from_ss(&c.spec).unwrap();
        let back: ArxModel = serde_json::from_str(&serde_json::to_string(&arx).unwrap()).unwrap();
        prop_assert_eq!(back, arx);
        let ops = opcount_compare(&c.spec, Some(k));
        let back: OpCount = serde_json::from_str(&serde_json::to_string(&ops).unwrap()).unwrap();
        prop_assert_eq!(back, ops);

        let q = QuantParams::decade(2);
        let back: QuantParams = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        prop_assert_eq!(&back, &q);
        let trace = run_converted(&conv, &q, &c.x0, &c.ys, HORIZON).unwrap();
        let report = range_report(&trace).unwrap();
        let back: RangeReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        prop_assert_eq!(back, report);
        let ct = run_sandboxed(&SandboxVariant::Converted(&conv, q), &ModulusConfig::from_bits(128).unwrap(), &c.x0, &c.ys, HORIZON).unwrap();
        let summary = ct.summary();
        let back: SandboxSummary = serde_json::from_str(&serde_json::to_string(&summary).unwrap()).unwrap();
        prop_assert_eq!(back, summary);
    }
}
