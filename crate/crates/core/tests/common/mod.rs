#![allow(dead_code)]

use catbreed::fock::{density_from_pure, DensityMatrix, FockVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn pure(v: &FockVector) -> DensityMatrix {
    density_from_pure(v)
}

/// Random full-rank state on the first `support` levels, padded to `dim`.
pub fn random_density(seed: u64, support: usize, dim: usize) -> DensityMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(support, support, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let m = &a * a.adjoint();
    DensityMatrix::from_matrix(m).unwrap().normalized().unwrap().resized(dim).unwrap()
}
