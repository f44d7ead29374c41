//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use jointsense::capsule::Pose;
use jointsense::dataset::Record;
use jointsense::NUM_SENSORS;

/// ln Γ(x) for x > 0 from the Stirling series after shifting x above 15.
pub fn ln_gamma_stirling(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 15.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Student-t CDF by composite Simpson integration of the density from 0 to |t|.
pub fn t_cdf_quadrature(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma_stirling((df + 1.0) / 2.0) - ln_gamma_stirling(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let a = t.abs();
    let n = 20_000;
    let h = a / n as f64;
    let mut sum = density(0.0) + density(a);
    for i in 1..n {
        sum += density(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = sum * h / 3.0;
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Deterministic pseudo-random records (no physics, just valid ranges).
pub fn synthetic_records(n: usize, seed: u64) -> Vec<Record> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut counts = [0u16; NUM_SENSORS];
            for c in counts.iter_mut() {
                *c = rng.random_range(0..=628);
            }
            Record {
                t: i as f64 * 0.1,
                counts,
                pose: Pose {
                    x: rng.random_range(-0.01..0.01),
                    y: rng.random_range(-0.01..0.01),
                    z: rng.random_range(-0.01..0.01),
                    roll: rng.random_range(-45.0..45.0),
                    pitch: rng.random_range(-90.0..90.0),
                    yaw: rng.random_range(-90.0..90.0),
                },
            }
        })
        .collect()
}
