//! Seeded generators for random controllers shared by the integration tests.
#![allow(dead_code)]

use ictrl::ratmath::{frac, int, RatMatrix, RatPoly, Rational};
use ictrl::sysobs::{is_observable, ControllerSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    let num = rng.gen_range(-4..=4);
    let den = *[1, 1, 2, 3, 4, 5].choose(rng).unwrap();
    frac(num, den)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> RatMatrix {
    RatMatrix::from_fn(rows, cols, |_, _| {
        if rng.gen_bool(density) {
            small_rational(rng)
        } else {
            int(0)
        }
    })
}

/// Random integer matrix with determinant 1 (unit lower times unit upper).
pub fn unimodular(rng: &mut ChaCha8Rng, n: usize) -> RatMatrix {
    let lower = RatMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => int(1),
        std::cmp::Ordering::Greater => int(rng.gen_range(-2..=2)),
        std::cmp::Ordering::Less => int(0),
    });
    let upper = RatMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => int(1),
        std::cmp::Ordering::Less => int(rng.gen_range(-2..=2)),
        std::cmp::Ordering::Greater => int(0),
    });
    &lower * &upper
}

/// One of several families, chosen by `flavor`:
/// dense, sparse, conjugated diagonal with repeated or sign-flipped
/// eigenvalues, and companion matrices.
fn state_matrix(rng: &mut ChaCha8Rng, n: usize, flavor: usize) -> RatMatrix {
    match flavor % 4 {
        0 => random_matrix(rng, n, n, 0.8),
        1 => random_matrix(rng, n, n, 0.35),
        2 => {
            let pool = [int(-1), int(1), frac(1, 2), frac(-1, 2), int(0), int(2)];
            let d: Vec<Rational> = (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect();
            let s = unimodular(rng, n);
            &(&s * &RatMatrix::diag(&d)) * &s.inverse().unwrap()
        }
        _ => {
            let mut coeffs: Vec<Rational> = (0..n).map(|_| small_rational(rng)).collect();
            coeffs.push(int(1));
            RatPoly::new(coeffs).companion()
        }
    }
}

/// Random controller with observable `(F, H)` and full-row-rank `H`,
/// `n <= n_max`, `m <= m_max` (and `m <= n`), `p <= p_max`.
pub fn random_spec(
    rng: &mut ChaCha8Rng,
    n_max: usize,
    m_max: usize,
    p_max: usize,
) -> ControllerSpec {
    loop {
        let n = rng.gen_range(1..=n_max);
        let m = rng.gen_range(1..=m_max.min(n));
        let p = rng.gen_range(1..=p_max);
        let flavor = rng.gen_range(0..4);
        let f = state_matrix(rng, n, flavor);
        let g = random_matrix(rng, n, p, 0.7);
        let h = random_matrix(rng, m, n, 0.7);
        let x0 = random_matrix(rng, n, 1, 0.6);
        let Ok(spec) = ControllerSpec::new(f, g, h, x0) else {
            continue;
        };
        if is_observable(spec.f(), spec.h()).unwrap() {
            return spec;
        }
    }
}

pub fn corpus(
    seed: u64,
    count: usize,
    n_max: usize,
    m_max: usize,
    p_max: usize,
) -> Vec<ControllerSpec> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| random_spec(&mut r, n_max, m_max, p_max))
        .collect()
}

pub fn random_inputs(rng: &mut ChaCha8Rng, p: usize, horizon: usize) -> Vec<Vec<Rational>> {
    (0..horizon)
        .map(|_| (0..p).map(|_| small_rational(rng)).collect())
        .collect()
}
