//! Fixtures shared by the benchmarks.

use arvar_core::ErrorSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `n` errors with `σ(x) = ½x + ½` on uniform `x ∈ [0, 1]`.
pub fn linear_noise(n: usize, seed: u64) -> Vec<ErrorSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            ErrorSample::new(vec![x], (0.5 * x + 0.5) * z)
        })
        .collect()
}

/// Positive `σ` and standard normal errors of length `n`.
pub fn sigmas_and_errors(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let e = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (s, e)
}
