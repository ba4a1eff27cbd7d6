//! Seeded parameter samplers over the (theta1, theta2) box.

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::config::{THETA1_RANGE, THETA2_RANGE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Uniform,
    LatinHypercube,
    Grid,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "random" => Ok(Sampler::Uniform),
            "lhs" | "latin" | "latin-hypercube" => Ok(Sampler::LatinHypercube),
            "grid" => Ok(Sampler::Grid),
            _ => Err(Error::Invalid(format!("unknown sampler '{s}' (uniform, lhs, grid)"))),
        }
    }
}

/// `n` points in the default parameter box.
pub fn sample(sampler: Sampler, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    sample_in(sampler, n, seed, THETA1_RANGE, THETA2_RANGE)
}

pub fn sample_in(sampler: Sampler, n: usize, seed: u64, r1: (f64, f64), r2: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if !(r1.0 < r1.1 && r2.0 < r2.1) {
        return Err(Error::Invalid("empty parameter range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lerp = |r: (f64, f64), t: f64| r.0 + (r.1 - r.0) * t;
    let pts = match sampler {
        Sampler::Uniform => (0..n)
            .map(|_| (lerp(r1, rng.random::<f64>()), lerp(r2, rng.random::<f64>())))
            .collect(),
        Sampler::LatinHypercube => {
            let strata = |rng: &mut ChaCha8Rng| {
                let mut s: Vec<f64> = (0..n).map(|i| (i as f64 + rng.random::<f64>()) / n as f64).collect();
                s.shuffle(rng);
                s
            };
            let a = strata(&mut rng);
            let b = strata(&mut rng);
            a.into_iter().zip(b).map(|(u, v)| (lerp(r1, u), lerp(r2, v))).collect()
        }
        Sampler::Grid => {
            // near-square tensor grid with at least n nodes, truncated to n
            let side = ((n as f64).sqrt().ceil() as usize).max(1);
            let node = |i: usize| if side == 1 { 0.5 } else { i as f64 / (side - 1) as f64 };
            (0..side * side)
                .take(n)
                .map(|k| (lerp(r1, node(k % side)), lerp(r2, node(k / side))))
                .collect()
        }
    };
    Ok(pts)
}
