//! The Kronecker-sum parameter pair and the operations that only depend on it.
//!
//! `Ω = Θ ⊕ Ψ = Θ ⊗ I_q + I_p ⊗ Ψ`, indexed so that entry
//! `((i·q + k), (j·q + l))` equals `Θ_ij·δ_kl + δ_ij·Ψ_kl`. This matches the
//! column-stacked `vec(Y)` of a `q × p` observation `Y`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{eigendecompose, DenseSymMatrix, EigenSystem};

/// Largest `p·q` for which [`kron_sum_dense`] will materialize `Ω`.
pub const KRON_SUM_MAX_DIM: usize = 10_000;

/// A positive-definite Kronecker-sum pair `(Θ, Ψ)` with cached eigensystems.
///
/// The eigensystems are computed on construction and never go stale: every
/// way of producing a new model goes through a constructor.
#[derive(Debug, Clone)]
pub struct KsModel {
    theta: DenseSymMatrix,
    psi: DenseSymMatrix,
    eig_theta: EigenSystem,
    eig_psi: EigenSystem,
}

impl KsModel {
    pub fn new(theta: DenseSymMatrix, psi: DenseSymMatrix) -> Result<Self> {
        let eig_theta = eigendecompose(&theta)?;
        let eig_psi = eigendecompose(&psi)?;
        Self::from_parts(theta, psi, eig_theta, eig_psi)
    }

    /// `Θ = I_p`, `Ψ = I_q`.
    pub fn identity(p: usize, q: usize) -> Self {
        Self::new(DenseSymMatrix::identity(p), DenseSymMatrix::identity(q))
            .expect("identity pair is positive definite")
    }

    pub(crate) fn from_parts(
        theta: DenseSymMatrix,
        psi: DenseSymMatrix,
        eig_theta: EigenSystem,
        eig_psi: EigenSystem,
    ) -> Result<Self> {
        let min_pair_sum = eig_theta.min() + eig_psi.min();
        if !(min_pair_sum > 0.0) {
            return Err(Error::NotPositiveDefinite { min_pair_sum });
        }
        Ok(Self {
            theta,
            psi,
            eig_theta,
            eig_psi,
        })
    }

    pub fn p(&self) -> usize {
        self.theta.dim()
    }

    pub fn q(&self) -> usize {
        self.psi.dim()
    }

    pub fn theta(&self) -> &DenseSymMatrix {
        &self.theta
    }

    pub fn psi(&self) -> &DenseSymMatrix {
        &self.psi
    }

    pub fn eig_theta(&self) -> &EigenSystem {
        &self.eig_theta
    }

    pub fn eig_psi(&self) -> &EigenSystem {
        &self.eig_psi
    }

    /// Smallest eigenvalue of `Θ ⊕ Ψ`.
    pub fn min_pair_sum(&self) -> f64 {
        self.eig_theta.min() + self.eig_psi.min()
    }

    /// Largest eigenvalue of `Θ ⊕ Ψ`.
    pub fn max_pair_sum(&self) -> f64 {
        self.eig_theta.max() + self.eig_psi.max()
    }

    /// Moves `c` from the diagonal of `Ψ` to the diagonal of `Θ`:
    /// `(Θ + cI, Ψ − cI)`. The Kronecker sum is unchanged.
    pub fn gauge_shift(&self, c: f64) -> Result<Self> {
        Self::from_parts(
            self.theta.shifted(c),
            self.psi.shifted(-c),
            self.eig_theta.shifted(c),
            self.eig_psi.shifted(-c),
        )
    }

    pub fn into_parts(self) -> (DenseSymMatrix, DenseSymMatrix) {
        (self.theta, self.psi)
    }
}

/// Dense `Θ ⊕ Ψ`. Test-scale only.
pub fn kron_sum_dense(theta: &DenseSymMatrix, psi: &DenseSymMatrix) -> Result<DenseSymMatrix> {
    let (p, q) = (theta.dim(), psi.dim());
    let n = p * q;
    if n > KRON_SUM_MAX_DIM {
        return Err(Error::SizeCap {
            what: "dense Kronecker sum",
            requested: n,
            cap: KRON_SUM_MAX_DIM,
        });
    }
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..p {
        for j in 0..p {
            let t = theta.get(i, j);
            if t != 0.0 {
                for k in 0..q {
                    omega[(i * q + k, j * q + k)] += t;
                }
            }
        }
        for k in 0..q {
            for l in 0..q {
                omega[(i * q + k, i * q + l)] += psi.get(k, l);
            }
        }
    }
    DenseSymMatrix::new(omega)
}

/// `log |Θ ⊕ Ψ| = Σ_{l,k} log(λ_Θ,l + λ_Ψ,k)`.
pub fn ks_logdet(eig_theta: &EigenSystem, eig_psi: &EigenSystem) -> Result<f64> {
    let min_pair_sum = eig_theta.min() + eig_psi.min();
    if !(min_pair_sum > 0.0) {
        return Err(Error::NotPositiveDefinite { min_pair_sum });
    }
    let mut acc = 0.0;
    for &lt in eig_theta.values().iter() {
        for &lp in eig_psi.values().iter() {
            acc += (lt + lp).ln();
        }
    }
    Ok(acc)
}

/// Diagonal block sums of a Kronecker-sum matrix `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSums {
    /// `Σ_k Ω_{(j,k),(j,k)}` for each feature `j` (length p).
    pub per_feature: Vec<f64>,
    /// `Σ_j Ω_{(j,k),(j,k)}` for each sample index `k` (length q).
    pub per_sample: Vec<f64>,
    pub trace: f64,
}

impl DiagonalSums {
    /// Reads the sums off a dense `pq × pq` matrix.
    pub fn from_dense(omega: &DenseSymMatrix, p: usize, q: usize) -> Result<Self> {
        if omega.dim() != p * q {
            return Err(Error::Dimension(format!(
                "Omega is {}x{}, expected {}",
                omega.dim(),
                omega.dim(),
                p * q
            )));
        }
        let mut per_feature = vec![0.0; p];
        let mut per_sample = vec![0.0; q];
        for j in 0..p {
            for k in 0..q {
                let v = omega.get(j * q + k, j * q + k);
                per_feature[j] += v;
                per_sample[k] += v;
            }
        }
        Ok(Self {
            per_feature,
            per_sample,
            trace: omega.trace(),
        })
    }

    /// The same sums computed directly from a pair, without forming `Ω`.
    pub fn from_pair(theta: &DenseSymMatrix, psi: &DenseSymMatrix) -> Self {
        let (p, q) = (theta.dim() as f64, psi.dim() as f64);
        let (tr_t, tr_p) = (theta.trace(), psi.trace());
        Self {
            per_feature: theta.diagonal().iter().map(|d| q * d + tr_p).collect(),
            per_sample: psi.diagonal().iter().map(|d| p * d + tr_t).collect(),
            trace: q * tr_t + p * tr_p,
        }
    }
}

/// Recovers `diag(Θ)` and `diag(Ψ)` from the diagonal sums of `Ω` and the
/// trace ratio `ρ = tr(Ψ)/tr(Θ)`.
pub fn identify_diagonals(sums: &DiagonalSums, rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Input(format!("trace ratio must be positive, got {rho}")));
    }
    let p = sums.per_feature.len();
    let q = sums.per_sample.len();
    if p == 0 || q == 0 {
        return Err(Error::Dimension("empty diagonal sums".into()));
    }
    let tr = sums.trace;
    let feature_total: f64 = sums.per_feature.iter().sum();
    let sample_total: f64 = sums.per_sample.iter().sum();
    let tol = 1e-10 * tr.abs().max(1.0);
    if (feature_total - tr).abs() > tol || (sample_total - tr).abs() > tol {
        return Err(Error::Input(format!(
            "inconsistent diagonal sums: features {feature_total}, samples {sample_total}, trace {tr}"
        )));
    }
    let (pf, qf) = (p as f64, q as f64);
    let denom = qf + rho * pf;
    let theta_diag = sums
        .per_feature
        .iter()
        .map(|s| (s - rho / denom * tr) / qf)
        .collect();
    let psi_diag = sums
        .per_sample
        .iter()
        .map(|s| (s - tr / denom) / pf)
        .collect();
    Ok((theta_diag, psi_diag))
}

/// Shift `c` that brings `tr(Ψ)/tr(Θ)` to `rho` via `(Θ + cI, Ψ − cI)`.
pub fn trace_ratio_shift(theta_trace: f64, psi_trace: f64, p: usize, q: usize, rho: f64) -> f64 {
    (psi_trace - rho * theta_trace) / (q as f64 + rho * p as f64)
}

pub(crate) fn checked_trace_ratio_shift(
    theta_trace: f64,
    psi_trace: f64,
    p: usize,
    q: usize,
    rho: f64,
    scale: f64,
) -> Result<f64> {
    let c = trace_ratio_shift(theta_trace, psi_trace, p, q, rho);
    let trace_theta = theta_trace + p as f64 * c;
    if trace_theta.abs() <= 1e-14 * scale * p as f64 {
        return Err(Error::DegenerateGauge { trace_theta });
    }
    Ok(c)
}

/// Moves the model within its equivalence class so that `tr(Ψ)/tr(Θ) = rho`.
pub fn adjust_trace_ratio(model: &KsModel, rho: f64) -> Result<KsModel> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Input(format!("trace ratio must be positive, got {rho}")));
    }
    let scale = model.theta().max_abs().max(model.psi().max_abs()).max(1.0);
    let c = checked_trace_ratio_shift(
        model.theta().trace(),
        model.psi().trace(),
        model.p(),
        model.q(),
        rho,
        scale,
    )?;
    if c == 0.0 {
        return Ok(model.clone());
    }
    model.gauge_shift(c)
}
