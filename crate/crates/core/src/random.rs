//! Seeded random instances for tests and the `verify` command.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operator::{CMat, HermitianOperator};

pub type TestRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with independent entries uniform in `[-scale, scale] + i[-scale, scale]`.
pub fn random_complex(rng: &mut impl Rng, dim: usize, scale: f64) -> CMat {
    DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-scale..=scale), rng.random_range(-scale..=scale))
    })
}

/// Random Hermitian matrix `(A + A*) / 2`.
pub fn random_hermitian(rng: &mut impl Rng, dim: usize, scale: f64) -> HermitianOperator {
    let a = random_complex(rng, dim, scale);
    HermitianOperator::from_hermitian_part(&a).expect("square by construction")
}

/// Diagonal nonnegative `H0` with well separated entries `0, s, 2s, ...`
/// jittered by at most `s / 4`.
pub fn random_reference(rng: &mut impl Rng, dim: usize, spacing: f64) -> HermitianOperator {
    let diag: Vec<f64> = (0..dim)
        .map(|i| {
            let jitter = if i == 0 {
                0.0
            } else {
                rng.random_range(-0.25..=0.25) * spacing
            };
            i as f64 * spacing + jitter
        })
        .collect();
    HermitianOperator::from_real_diagonal(&diag)
}

/// Random unitary from the QR factorization of a complex Gaussian-like
/// matrix.
pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> CMat {
    let a = random_complex(rng, dim, 1.0);
    a.qr().q()
}
