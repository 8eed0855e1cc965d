//! Ground-truth graphs and exact matrix-variate Gaussian sampling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{eigendecompose, DenseSymMatrix};
use crate::model::KsModel;
use crate::solver::threshold_components;

/// Accepted relative deviation of the realized nonzero count from its target.
pub const NNZ_TOLERANCE: f64 = 0.3;
/// Redraws allowed before giving up on a target.
pub const MAX_GENERATION_ATTEMPTS: usize = 200;
/// Redraws allowed for a clustered block until its support is connected.
pub const MAX_CONNECT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Random,
    Clustered,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(GraphKind::Random),
            "clustered" => Ok(GraphKind::Clustered),
            other => Err(Error::Input(format!(
                "unknown graph kind {other:?} (expected random or clustered)"
            ))),
        }
    }
}

impl GraphKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraphKind::Random => "random",
            GraphKind::Clustered => "clustered",
        }
    }
}

/// What to generate. `target_nnz` applies to random graphs (diagonal
/// included), `num_blocks` to clustered ones.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub size: usize,
    pub target_nnz: usize,
    pub num_blocks: usize,
    pub seed: u64,
}

impl GraphSpec {
    pub fn random(size: usize, target_nnz: usize, seed: u64) -> Self {
        Self {
            kind: GraphKind::Random,
            size,
            target_nnz,
            num_blocks: 1,
            seed,
        }
    }

    pub fn clustered(size: usize, num_blocks: usize, seed: u64) -> Self {
        Self {
            kind: GraphKind::Clustered,
            size,
            target_nnz: 0,
            num_blocks,
            seed,
        }
    }

    pub fn generate(&self) -> Result<DenseSymMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.kind {
            GraphKind::Random => gen_random_graph(self.size, self.target_nnz, &mut rng),
            GraphKind::Clustered => gen_cluster_graph(self.size, self.num_blocks, &mut rng),
        }
    }
}

/// Probability that a sum of `m` independent ±1 signs is zero.
fn balanced_sign_probability(m: usize) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    // C(m, m/2) / 2^m in log space
    let half = m / 2;
    let ln_choose: f64 = (1..=half).map(|k| ((half + k) as f64 / k as f64).ln()).sum();
    (ln_choose - m as f64 * std::f64::consts::LN_2).exp()
}

/// Expected nonzeros of `AAᵀ + diag` when each entry of `A` is nonzero with
/// probability `d`.
pub fn expected_nnz(n: usize, d: f64) -> f64 {
    if n <= 1 {
        return n as f64;
    }
    let r = d * d;
    // Σ_m Binomial(n, r)(m) · P(balanced | m), accumulated in log space.
    let mut p_zero = 0.0;
    for m in (0..=n).step_by(2) {
        let ln_binom = ln_choose(n, m)
            + if m > 0 { m as f64 * r.ln() } else { 0.0 }
            + if n > m { (n - m) as f64 * (1.0 - r).ln() } else { 0.0 };
        if ln_binom.is_finite() {
            p_zero += ln_binom.exp() * balanced_sign_probability(m);
        }
    }
    n as f64 + (n * (n - 1)) as f64 * (1.0 - p_zero)
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Density of `A` whose expected fill matches `target`, by bisection.
fn calibrate_density(n: usize, target: usize) -> f64 {
    let target = target as f64;
    if target <= n as f64 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if expected_nnz(n, hi) <= target {
        return hi;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected_nnz(n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn draw_random_graph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> DenseSymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| {
        if rng.random::<f64>() < density {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    });
    let mut theta = &a * a.transpose();
    for i in 0..n {
        theta[(i, i)] += rng.random_range(0.0..0.1) + 1e-4;
    }
    DenseSymMatrix::symmetrize(theta).expect("finite square product")
}

/// Sparse positive definite `AAᵀ + diag(σ_i + 10⁻⁴)` with about
/// `target_nnz` nonzeros in total.
pub fn gen_random_graph(size: usize, target_nnz: usize, rng: &mut ChaCha8Rng) -> Result<DenseSymMatrix> {
    if size == 0 {
        return Err(Error::Input("graph size must be positive".into()));
    }
    if target_nnz > size * size {
        return Err(Error::Input(format!(
            "target of {target_nnz} nonzeros exceeds {size}x{size} entries"
        )));
    }
    let density = calibrate_density(size, target_nnz);
    let (lo, hi) = (
        (1.0 - NNZ_TOLERANCE) * target_nnz as f64,
        (1.0 + NNZ_TOLERANCE) * target_nnz as f64,
    );
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let theta = draw_random_graph(size, density, rng);
        let nnz = theta.nnz(0.0) as f64;
        if nnz >= lo && nnz <= hi && eigendecompose(&theta)?.min() > 0.0 {
            return Ok(theta);
        }
    }
    Err(Error::Generation(format!(
        "no {size}x{size} graph with about {target_nnz} nonzeros after {MAX_GENERATION_ATTEMPTS} draws"
    )))
}

/// Block sizes: `size / num_blocks` each, with the remainder on the last.
pub fn block_sizes(size: usize, num_blocks: usize) -> Vec<usize> {
    let base = size / num_blocks;
    let mut sizes = vec![base; num_blocks];
    sizes[num_blocks - 1] += size - base * num_blocks;
    sizes
}

/// Nonzero target for one `b × b` block: `min(size, b²)`, raised to
/// `b + 1.5·b·ln b` when that is too sparse to connect the block.
pub fn block_target(size: usize, b: usize) -> usize {
    if b <= 1 {
        return b;
    }
    let bf = b as f64;
    let floor = b + (1.5 * bf * bf.ln()).ceil() as usize;
    size.min(b * b).max(floor).min(b * b)
}

/// Block-diagonal graph whose blocks are connected random graphs, each with
/// about `block_target(size, b)` nonzeros.
pub fn gen_cluster_graph(size: usize, num_blocks: usize, rng: &mut ChaCha8Rng) -> Result<DenseSymMatrix> {
    if num_blocks == 0 || num_blocks > size {
        return Err(Error::Input(format!(
            "cannot split {size} nodes into {num_blocks} blocks"
        )));
    }
    let mut theta = DMatrix::zeros(size, size);
    let mut offset = 0;
    for b in block_sizes(size, num_blocks) {
        let target = block_target(size, b);
        let mut block = None;
        for _ in 0..MAX_CONNECT_ATTEMPTS {
            let candidate = gen_random_graph(b, target, rng)?;
            if threshold_components(&candidate, 0.0).iter().all(|&l| l == 0) {
                block = Some(candidate);
                break;
            }
        }
        let block = block.ok_or_else(|| {
            Error::Generation(format!("no connected {b}x{b} block after {MAX_CONNECT_ATTEMPTS} draws"))
        })?;
        theta.view_mut((offset, offset), (b, b)).copy_from(block.as_matrix());
        offset += b;
    }
    DenseSymMatrix::new(theta)
}

/// `n` draws of `Y` (q × p) with `vec(Y) ~ N(0, (Θ ⊕ Ψ)⁻¹)`.
pub fn sample_data(model: &KsModel, n: usize, rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    let (p, q) = (model.p(), model.q());
    let lt = model.eig_theta().values();
    let lp = model.eig_psi().values();
    let scale = DMatrix::from_fn(q, p, |k, l| 1.0 / (lt[l] + lp[k]).sqrt());
    let qt_t = model.eig_theta().vectors().transpose();
    let qp = model.eig_psi().vectors();
    (0..n)
        .map(|_| {
            let z = DMatrix::from_fn(q, p, |k, l| rng.sample::<f64, _>(StandardNormal) * scale[(k, l)]);
            qp * z * &qt_t
        })
        .collect()
}
