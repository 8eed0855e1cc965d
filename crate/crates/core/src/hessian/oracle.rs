//! Brute-force Hessians built from the dense covariance `W = (Θ ⊕ Ψ)⁻¹`.
//!
//! Two independent assemblies are provided: explicit selector matrices
//! applied to `W ⊗ W`, and a two-stage collapse that first contracts one
//! copy of `W` and then the other, yielding a rearranged Kronecker square.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::DenseSymMatrix;
use crate::objective::dense_covariance;

/// Largest `p` or `q` accepted by the oracles.
pub const HESSIAN_ORACLE_MAX_DIM: usize = 5;

/// `I_p ⊗ e_{q,i}`: picks sample index `i` out of every feature block.
fn theta_selector(p: usize, q: usize, i: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p * q, p, |row, col| {
        if row / q == col && row % q == i {
            1.0
        } else {
            0.0
        }
    })
}

/// `e_{p,j} ⊗ I_q`: picks feature block `j`.
fn psi_selector(p: usize, q: usize, j: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p * q, q, |row, col| {
        if row / q == j && row % q == col {
            1.0
        } else {
            0.0
        }
    })
}

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Undoes `vec(B)vec(B)ᵀ ↔ B ⊗ B` for `B` of shape `rows × cols`.
fn unrearrange(pm: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows * rows, cols * cols, |r, c| {
        let (r1, r2) = (r / rows, r % rows);
        let (c1, c2) = (c / cols, c % cols);
        pm[(c1 * rows + r1, c2 * rows + r2)]
    })
}

/// `Pᵀ (W ⊗ W) P` with `P = [Σ_i R_i ⊗ R_i, Σ_j S_j ⊗ S_j]`.
fn selector_route(w: &DMatrix<f64>, p: usize, q: usize) -> DMatrix<f64> {
    let n = p * q;
    let mut sel = DMatrix::zeros(n * n, p * p + q * q);
    for i in 0..q {
        let r = theta_selector(p, q, i);
        let mut block = sel.view_mut((0, 0), (n * n, p * p));
        block += r.kronecker(&r);
    }
    for j in 0..p {
        let s = psi_selector(p, q, j);
        let mut block = sel.view_mut((0, p * p), (n * n, q * q));
        block += s.kronecker(&s);
    }
    let ww = w.kronecker(w);
    sel.transpose() * ww * sel
}

/// Contracts `M = Σ_j vec(W X_j) vec(W X_j)ᵀ` on the left factor with `Y_i`,
/// giving `Σ_{i,j} vec(Y_iᵀ W X_j) vec(Y_iᵀ W X_j)ᵀ`.
fn two_stage(w: &DMatrix<f64>, right: &[DMatrix<f64>], left: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = right[0].ncols();
    let len = w.nrows() * cols;
    let mut m = DMatrix::zeros(len, len);
    for x in right {
        let v = vec_of(&(w * x));
        m += &v * v.transpose();
    }
    let id = DMatrix::<f64>::identity(cols, cols);
    let out_len = left[0].ncols() * cols;
    let mut out = DMatrix::zeros(out_len, out_len);
    for y in left {
        let lift = id.kronecker(y);
        out += lift.transpose() * &m * lift;
    }
    out
}

/// The Hessian blocks via the two-stage collapse.
fn collapse_route(w: &DMatrix<f64>, p: usize, q: usize) -> DMatrix<f64> {
    let rs: Vec<_> = (0..q).map(|i| theta_selector(p, q, i)).collect();
    let ss: Vec<_> = (0..p).map(|j| psi_selector(p, q, j)).collect();
    let h_theta = unrearrange(&two_stage(w, &rs, &rs), p, p);
    let h_psi = unrearrange(&two_stage(w, &ss, &ss), q, q);
    let h_cross = unrearrange(&two_stage(w, &ss, &rs), p, q);
    let (a, b) = (p * p, q * q);
    let mut out = DMatrix::zeros(a + b, a + b);
    out.view_mut((0, 0), (a, a)).copy_from(&h_theta);
    out.view_mut((a, a), (b, b)).copy_from(&h_psi);
    out.view_mut((0, a), (a, b)).copy_from(&h_cross);
    out.view_mut((a, 0), (b, a)).copy_from(&h_cross.transpose());
    out
}

/// Both oracle assemblies, in order (selector, two-stage collapse).
pub fn hessian_oracle_routes(
    theta: &DenseSymMatrix,
    psi: &DenseSymMatrix,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, q) = (theta.dim(), psi.dim());
    if p.max(q) > HESSIAN_ORACLE_MAX_DIM {
        return Err(Error::SizeCap {
            what: "Hessian oracle",
            requested: p.max(q),
            cap: HESSIAN_ORACLE_MAX_DIM,
        });
    }
    let w = dense_covariance(theta, psi)?;
    Ok((selector_route(&w, p, q), collapse_route(&w, p, q)))
}

/// The full `(p² + q²)`-square Hessian, checked across both assemblies.
pub fn hessian_oracle_full(theta: &DenseSymMatrix, psi: &DenseSymMatrix) -> Result<DMatrix<f64>> {
    let (a, b) = hessian_oracle_routes(theta, psi)?;
    let gap = (&a - &b).amax();
    if gap > 1e-10 * a.amax().max(1.0) {
        return Err(Error::Consistency(format!(
            "Hessian oracle assemblies disagree by {gap:e}"
        )));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hessian::{build_exact, null_direction};
    use crate::testutil::random_model;

    #[test]
    fn identity_blocks() {
        let h = hessian_oracle_full(&DenseSymMatrix::identity(2), &DenseSymMatrix::identity(2)).unwrap();
        let block = h.view((0, 0), (4, 4)).into_owned();
        assert!((block - DMatrix::identity(4, 4) * 0.5).amax() < 1e-14);
    }

    #[test]
    fn null_vector() {
        let m = random_model(3, 2, 3);
        let h = hessian_oracle_full(m.theta(), m.psi()).unwrap();
        assert!((h * null_direction(3, 2)).norm() < 1e-10);
    }

    #[test]
    fn matches_eigen_form() {
        for (p, q, seed) in [(3, 2, 1), (2, 4, 2), (5, 3, 3)] {
            let m = random_model(p, q, seed);
            let h = hessian_oracle_full(m.theta(), m.psi()).unwrap();
            let e = build_exact(&m).unwrap().dense();
            assert!((h - e).amax() < 1e-8);
        }
    }

    #[test]
    fn size_cap() {
        let r = hessian_oracle_full(&DenseSymMatrix::identity(6), &DenseSymMatrix::identity(2));
        assert!(matches!(r, Err(Error::SizeCap { .. })));
    }
}
