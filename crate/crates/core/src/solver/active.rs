//! Free coordinates for one Newton iteration, and the block screen that
//! permanently fixes coordinates across disconnected components.

use crate::matrix::DenseSymMatrix;
use crate::model::KsModel;
use crate::objective::Gradient;
use crate::stats::SampleStats;

/// Upper-triangle coordinates `(i, j)`, `i ≤ j`, allowed to move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSets {
    pub a_theta: Vec<(usize, usize)>,
    pub a_psi: Vec<(usize, usize)>,
}

/// Off-diagonal pairs that must stay zero, as a symmetric boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedMask {
    n: usize,
    fixed: Vec<bool>,
}

impl FixedMask {
    pub fn none(n: usize) -> Self {
        Self {
            n,
            fixed: vec![false; n * n],
        }
    }

    /// Fixes every pair whose endpoints carry different labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        let n = labels.len();
        let mut fixed = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                fixed[i * n + j] = labels[i] != labels[j];
            }
        }
        Self { n, fixed }
    }

    pub fn is_fixed(&self, i: usize, j: usize) -> bool {
        self.fixed[i * self.n + j]
    }

    pub fn count_fixed_pairs(&self) -> usize {
        self.fixed.iter().filter(|&&f| f).count() / 2
    }
}

fn block_active(
    x: &DenseSymMatrix,
    g: &DenseSymMatrix,
    threshold: f64,
    mask: &FixedMask,
) -> Vec<(usize, usize)> {
    let n = x.dim();
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                out.push((i, j));
            } else if !mask.is_fixed(i, j) && (x.get(i, j) != 0.0 || g.get(i, j).abs() > threshold) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Fixed masks for both factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenMasks {
    pub theta: FixedMask,
    pub psi: FixedMask,
}

impl ScreenMasks {
    pub fn none(p: usize, q: usize) -> Self {
        Self {
            theta: FixedMask::none(p),
            psi: FixedMask::none(q),
        }
    }
}

/// Diagonals, current nonzeros and gradient-threshold violators, less the
/// fixed masks. Thresholds are `q·γ_Θ` and `p·γ_Ψ`.
pub fn detect_active_sets(
    model: &KsModel,
    grad: &Gradient,
    gamma_theta: f64,
    gamma_psi: f64,
    masks: &ScreenMasks,
) -> ActiveSets {
    let (p, q) = (model.p() as f64, model.q() as f64);
    ActiveSets {
        a_theta: block_active(model.theta(), &grad.g_theta, q * gamma_theta, &masks.theta),
        a_psi: block_active(model.psi(), &grad.g_psi, p * gamma_psi, &masks.psi),
    }
}

/// Connected components of `{(i, j) : |m_ij| > threshold}` as labels
/// numbered in order of first appearance.
pub fn threshold_components(m: &DenseSymMatrix, threshold: f64) -> Vec<usize> {
    let n = m.dim();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if v != u && labels[v] == usize::MAX && m.get(u, v).abs() > threshold {
                    labels[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    labels
}

/// Groups labels into index sets.
pub fn partition_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut parts = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        parts[l].push(i);
    }
    parts
}

/// Component partitions of the thresholded `S` and `T`.
pub fn screen_blocks(
    stats: &SampleStats,
    gamma_theta: f64,
    gamma_psi: f64,
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    (
        partition_from_labels(&threshold_components(stats.s(), gamma_theta)),
        partition_from_labels(&threshold_components(stats.t(), gamma_psi)),
    )
}

/// Fixed-zero masks implied by [`screen_blocks`].
pub fn screening_masks(stats: &SampleStats, gamma_theta: f64, gamma_psi: f64) -> ScreenMasks {
    ScreenMasks {
        theta: FixedMask::from_labels(&threshold_components(stats.s(), gamma_theta)),
        psi: FixedMask::from_labels(&threshold_components(stats.t(), gamma_psi)),
    }
}
