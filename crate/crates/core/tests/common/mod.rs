#![allow(dead_code)]

use eot_core::{CostMatrix, Measure, Problem};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> Measure {
    Measure::normalised(Array1::from_shape_fn(n, |_| 0.05 + rng.random::<f64>())).unwrap()
}

/// Uniform entries in [0, 1], rescaled so that ‖C‖∞ = 1.
pub fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CostMatrix {
    CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random::<f64>())).unwrap().normalised()
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize, gamma: f64) -> Problem {
    let a = random_measure(rng, n);
    let b = random_measure(rng, m);
    let c = random_cost(rng, n, m);
    Problem::new(a, b, c, gamma).unwrap()
}
