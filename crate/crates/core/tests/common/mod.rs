#![allow(dead_code)]

use ksglasso::simulate::{sample_data, GraphSpec};
use ksglasso::{sample_stats, DenseSymMatrix, KsModel, SampleStats};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `AAᵀ/n + floor·I` with uniform entries in `A`.
pub fn random_spd(n: usize, floor: f64, rng: &mut ChaCha8Rng) -> DenseSymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &a * a.transpose() / n as f64;
    for i in 0..n {
        m[(i, i)] += floor;
    }
    DenseSymMatrix::symmetrize(m).unwrap()
}

pub fn random_model(p: usize, q: usize, floor: f64, rng: &mut ChaCha8Rng) -> KsModel {
    KsModel::new(random_spd(p, floor, rng), random_spd(q, floor, rng)).unwrap()
}

/// Statistics of `n` samples with uniform entries.
pub fn random_stats(p: usize, q: usize, n: usize, rng: &mut ChaCha8Rng) -> SampleStats {
    let data: Vec<_> = (0..n)
        .map(|_| DMatrix::from_fn(q, p, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    sample_stats(&data).unwrap()
}

/// Random-graph truth with `10·size` nonzeros per factor and `n` samples.
pub fn random_graph_instance(p: usize, q: usize, n: usize, seed: u64) -> (KsModel, SampleStats) {
    let theta = GraphSpec::random(p, 10 * p, seed).generate().unwrap();
    let psi = GraphSpec::random(q, 10 * q, seed + 1).generate().unwrap();
    let truth = KsModel::new(theta, psi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let stats = sample_stats(&sample_data(&truth, n, &mut rng)).unwrap();
    (truth, stats)
}

pub fn clustered_instance(p: usize, q: usize, blocks: usize, n: usize, seed: u64) -> (KsModel, SampleStats) {
    let theta = GraphSpec::clustered(p, blocks, seed).generate().unwrap();
    let psi = GraphSpec::clustered(q, blocks, seed + 1).generate().unwrap();
    let truth = KsModel::new(theta, psi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let stats = sample_stats(&sample_data(&truth, n, &mut rng)).unwrap();
    (truth, stats)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
