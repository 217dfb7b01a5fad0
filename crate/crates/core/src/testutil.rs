use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{chain_to_jacobi, JacobiMatrix};
use crate::fixtures::random_loguniform;

pub fn random_chain_matrix(rng: &mut ChaCha8Rng, size: usize) -> JacobiMatrix {
    chain_to_jacobi(&random_loguniform(rng.gen(), size).unwrap())
}

/// Points with real part across a chain's spectral range and
/// `|Im z|` in `[0.1, 10]` on both half-planes.
pub fn sample_off_axis(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|_| {
            let im = rng.gen_range(0.1..10.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            Complex64::new(rng.gen_range(-10.0..2.0), im)
        })
        .collect()
}
