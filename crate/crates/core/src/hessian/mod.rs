//! Hessian of the smooth objective in eigen-form.
//!
//! Both diagonal blocks are sums of Kronecker squares of "V-factors"
//! `V_Θ,k = Q_Θ (Λ_Θ + λ_Ψ,k I)⁻¹ Q_Θᵀ`. The exact Hessian uses all of them
//! and couples the blocks through the `λ_W²` grid; the approximate Hessian
//! keeps the `K` factors built from the smallest co-eigenvalues, gives the
//! `K`-th factor the weight of the discarded tail, and drops the coupling.

mod oracle;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::EigenSystem;
use crate::model::KsModel;

pub use oracle::{hessian_oracle_full, hessian_oracle_routes, HESSIAN_ORACLE_MAX_DIM};

/// One diagonal block `Σ_k w_k · V_k ⊗ V_k`.
#[derive(Debug, Clone)]
pub struct FactorBlock {
    pub factors: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
}

impl FactorBlock {
    pub fn dim(&self) -> usize {
        self.factors[0].nrows()
    }

    /// `Σ_k w_k · V_k ⊗ V_k` as a dense `n² × n²` matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n * n, n * n);
        for (v, &w) in self.factors.iter().zip(&self.weights) {
            out += v.kronecker(v) * w;
        }
        out
    }
}

/// All `q` Θ-factors, all `p` Ψ-factors and the cross-coupling grid.
#[derive(Debug, Clone)]
pub struct ExactHessianRep {
    pub theta: FactorBlock,
    pub psi: FactorBlock,
    /// `λ_W[l][k] = 1/(λ_Θ,l + λ_Ψ,k)`, `p × q`.
    pub lambda_w: DMatrix<f64>,
    pub q_theta: DMatrix<f64>,
    pub q_psi: DMatrix<f64>,
}

/// `K` factors per block with the tail folded into the last one.
#[derive(Debug, Clone)]
pub struct ApproxHessianRep {
    pub k_trunc: usize,
    pub theta: FactorBlock,
    pub psi: FactorBlock,
    pub tail_weight_theta: f64,
    pub tail_weight_psi: f64,
}

/// Which Hessian a caller wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianKind {
    Exact,
    Approx(usize),
}

fn v_factor(own: &EigenSystem, shift: f64) -> DMatrix<f64> {
    own.spectral_map(|l| 1.0 / (l + shift))
}

fn check_pd(model: &KsModel) -> Result<()> {
    let min_pair_sum = model.min_pair_sum();
    if !(min_pair_sum > 0.0) {
        return Err(Error::NotPositiveDefinite { min_pair_sum });
    }
    Ok(())
}

pub fn build_exact(model: &KsModel) -> Result<ExactHessianRep> {
    check_pd(model)?;
    let (et, ep) = (model.eig_theta(), model.eig_psi());
    let theta_factors: Vec<_> = ep.values().iter().map(|&m| v_factor(et, m)).collect();
    let psi_factors: Vec<_> = et.values().iter().map(|&l| v_factor(ep, l)).collect();
    let lambda_w = DMatrix::from_fn(model.p(), model.q(), |l, k| {
        1.0 / (et.values()[l] + ep.values()[k])
    });
    Ok(ExactHessianRep {
        theta: FactorBlock {
            weights: vec![1.0; theta_factors.len()],
            factors: theta_factors,
        },
        psi: FactorBlock {
            weights: vec![1.0; psi_factors.len()],
            factors: psi_factors,
        },
        lambda_w,
        q_theta: et.vectors().clone(),
        q_psi: ep.vectors().clone(),
    })
}

pub fn build_approx(model: &KsModel, k_trunc: usize) -> Result<ApproxHessianRep> {
    check_pd(model)?;
    let (p, q) = (model.p(), model.q());
    if k_trunc == 0 || k_trunc > p.min(q) {
        return Err(Error::Input(format!(
            "truncation K = {k_trunc} outside 1..={}",
            p.min(q)
        )));
    }
    let (et, ep) = (model.eig_theta(), model.eig_psi());
    let block = |own: &EigenSystem, other: &EigenSystem, tail: f64| {
        let factors: Vec<_> = (0..k_trunc).map(|k| v_factor(own, other.values()[k])).collect();
        let mut weights = vec![1.0; k_trunc];
        weights[k_trunc - 1] += tail;
        FactorBlock { factors, weights }
    };
    let tail_weight_theta = (q - k_trunc) as f64;
    let tail_weight_psi = (p - k_trunc) as f64;
    Ok(ApproxHessianRep {
        k_trunc,
        theta: block(et, ep, tail_weight_theta),
        psi: block(ep, et, tail_weight_psi),
        tail_weight_theta,
        tail_weight_psi,
    })
}

/// Places `[[a, c], [cᵀ, b]]` into one dense matrix.
fn assemble_blocks(a: DMatrix<f64>, b: DMatrix<f64>, c: Option<DMatrix<f64>>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(&a);
    out.view_mut((na, na), (nb, nb)).copy_from(&b);
    if let Some(c) = c {
        out.view_mut((0, na), (na, nb)).copy_from(&c);
        out.view_mut((na, 0), (nb, na)).copy_from(&c.transpose());
    }
    out
}

impl ExactHessianRep {
    pub fn p(&self) -> usize {
        self.q_theta.nrows()
    }

    pub fn q(&self) -> usize {
        self.q_psi.nrows()
    }

    /// `Σ_{l,k} λ_W,lk² · (q_Θ,l ⊗ q_Θ,l)(q_Ψ,k ⊗ q_Ψ,k)ᵀ`, `p² × q²`.
    pub fn cross_dense(&self) -> DMatrix<f64> {
        let (p, q) = (self.p(), self.q());
        let mut out = DMatrix::zeros(p * p, q * q);
        for l in 0..p {
            let ql = self.q_theta.column(l);
            let u = ql.kronecker(&ql);
            for k in 0..q {
                let qk = self.q_psi.column(k);
                let v = qk.kronecker(&qk);
                let w = self.lambda_w[(l, k)];
                out += &u * v.transpose() * (w * w);
            }
        }
        out
    }

    /// The full `(p² + q²)`-square Hessian.
    pub fn dense(&self) -> DMatrix<f64> {
        assemble_blocks(self.theta.dense(), self.psi.dense(), Some(self.cross_dense()))
    }
}

impl ApproxHessianRep {
    /// The block-diagonal `(p² + q²)`-square approximate Hessian.
    pub fn dense(&self) -> DMatrix<f64> {
        assemble_blocks(self.theta.dense(), self.psi.dense(), None)
    }
}

/// Closed-form spectral extremes.
///
/// For the exact Hessian these are the smallest nonzero and largest
/// eigenvalue formulas `min{p,q}(λ_Θ,max + λ_Ψ,max)⁻²` and
/// `(p+q)(λ_Θ,min + λ_Ψ,min)⁻²`. They are attained when both factors are
/// multiples of the identity and bound the spectrum otherwise. For the
/// approximate Hessian they are the exact extremes of the block spectra.
pub fn eig_bounds(model: &KsModel, kind: HessianKind) -> Result<(f64, f64)> {
    check_pd(model)?;
    let (p, q) = (model.p(), model.q());
    let lt = model.eig_theta().values();
    let lp = model.eig_psi().values();
    let inv2 = |a: f64, b: f64| (a + b).powi(-2);
    match kind {
        HessianKind::Exact => Ok((
            p.min(q) as f64 * inv2(lt[p - 1], lp[q - 1]),
            (p + q) as f64 * inv2(lt[0], lp[0]),
        )),
        HessianKind::Approx(k) => {
            if k == 0 || k > p.min(q) {
                return Err(Error::Input(format!("truncation K = {k} outside 1..={}", p.min(q))));
            }
            let block = |fixed: f64, other: &nalgebra::DVector<f64>, tail: usize| {
                (0..k).map(|i| inv2(fixed, other[i])).sum::<f64>()
                    + tail as f64 * inv2(fixed, other[k - 1])
            };
            let theta_min = block(lt[p - 1], lp, q - k);
            let theta_max = block(lt[0], lp, q - k);
            let psi_min = block(lp[q - 1], lt, p - k);
            let psi_max = block(lp[0], lt, p - k);
            Ok((theta_min.min(psi_min), theta_max.max(psi_max)))
        }
    }
}

/// Eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `[vec(I_p); −vec(I_q)]`, the gauge direction.
pub fn null_direction(p: usize, q: usize) -> nalgebra::DVector<f64> {
    let mut v = nalgebra::DVector::zeros(p * p + q * q);
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    for k in 0..q {
        v[p * p + k * q + k] = -1.0;
    }
    v
}
