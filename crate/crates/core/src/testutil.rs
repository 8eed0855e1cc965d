//! Random instances shared by unit tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::DenseSymMatrix;
use crate::model::KsModel;
use crate::stats::{sample_stats, SampleStats};

/// Symmetric positive definite `n × n` with a dense off-diagonal pattern.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DenseSymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    DenseSymMatrix::symmetrize(m).unwrap()
}

pub fn random_model(p: usize, q: usize, seed: u64) -> KsModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = random_spd(p, &mut rng);
    let psi = random_spd(q, &mut rng);
    KsModel::new(theta, psi).unwrap()
}

pub fn random_data(p: usize, q: usize, n: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| DMatrix::from_fn(q, p, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_stats(p: usize, q: usize, seed: u64) -> SampleStats {
    sample_stats(&random_data(p, q, 3, seed)).unwrap()
}
