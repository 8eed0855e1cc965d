//! Objective value and gradient of the penalized Kronecker-sum likelihood.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{DenseSymMatrix, EigenSystem};
use crate::model::{kron_sum_dense, ks_logdet, KsModel};
use crate::stats::SampleStats;

/// Largest `p·q` accepted by [`gradient_oracle`].
pub const GRADIENT_ORACLE_MAX_DIM: usize = 200;

/// Smooth part `g`, penalty `h` and their sum `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

/// Gradient blocks `G_Θ` and `G_Ψ` of the smooth part.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub g_theta: DenseSymMatrix,
    pub g_psi: DenseSymMatrix,
}

fn check_dims(stats: &SampleStats, p: usize, q: usize) -> Result<()> {
    if stats.p() != p || stats.q() != q {
        return Err(Error::Dimension(format!(
            "statistics are for p={}, q={} but the model has p={p}, q={q}",
            stats.p(),
            stats.q()
        )));
    }
    Ok(())
}

/// `q·γ_Θ·Σ_{i≠j}|Θ_ij| + p·γ_Ψ·Σ_{i≠j}|Ψ_ij|`.
pub fn penalty(theta: &DenseSymMatrix, psi: &DenseSymMatrix, gamma_theta: f64, gamma_psi: f64) -> f64 {
    let (p, q) = (theta.dim() as f64, psi.dim() as f64);
    q * gamma_theta * theta.off_diagonal_l1() + p * gamma_psi * psi.off_diagonal_l1()
}

/// Smooth part `q·tr(SΘ) + p·tr(TΨ) − log|Θ ⊕ Ψ|` from cached eigensystems.
pub fn smooth_value(
    stats: &SampleStats,
    theta: &DenseSymMatrix,
    psi: &DenseSymMatrix,
    eig_theta: &EigenSystem,
    eig_psi: &EigenSystem,
) -> Result<f64> {
    let (p, q) = (theta.dim() as f64, psi.dim() as f64);
    let linear = q * stats.s().dot(theta) + p * stats.t().dot(psi);
    Ok(linear - ks_logdet(eig_theta, eig_psi)?)
}

pub fn objective(
    stats: &SampleStats,
    model: &KsModel,
    gamma_theta: f64,
    gamma_psi: f64,
) -> Result<Objective> {
    check_dims(stats, model.p(), model.q())?;
    if !(gamma_theta >= 0.0 && gamma_psi >= 0.0) {
        return Err(Error::Input("penalty weights must be non-negative".into()));
    }
    let g = smooth_value(stats, model.theta(), model.psi(), model.eig_theta(), model.eig_psi())?;
    let h = penalty(model.theta(), model.psi(), gamma_theta, gamma_psi);
    Ok(Objective { f: g + h, g, h })
}

/// `Q · diag(Σ_k 1/(λ_l + μ_k)) · Qᵀ`: one collapsed block of `W`.
pub(crate) fn collapsed_inverse(own: &EigenSystem, other: &EigenSystem) -> DMatrix<f64> {
    let others = other.values();
    own.spectral_map(|l| others.iter().map(|m| 1.0 / (l + m)).sum())
}

/// Gradient through the eigensystems, without forming `W`.
pub fn gradient(stats: &SampleStats, model: &KsModel) -> Result<Gradient> {
    check_dims(stats, model.p(), model.q())?;
    let min_pair_sum = model.min_pair_sum();
    if !(min_pair_sum > 0.0) {
        return Err(Error::NotPositiveDefinite { min_pair_sum });
    }
    let (p, q) = (model.p() as f64, model.q() as f64);
    let w_theta = collapsed_inverse(model.eig_theta(), model.eig_psi());
    let w_psi = collapsed_inverse(model.eig_psi(), model.eig_theta());
    Ok(Gradient {
        g_theta: DenseSymMatrix::symmetrize(stats.s().as_matrix() * q - w_theta)?,
        g_psi: DenseSymMatrix::symmetrize(stats.t().as_matrix() * p - w_psi)?,
    })
}

/// Gradient by explicit inversion of the dense `Θ ⊕ Ψ`. Test-scale only.
pub fn gradient_oracle(
    stats: &SampleStats,
    theta: &DenseSymMatrix,
    psi: &DenseSymMatrix,
) -> Result<Gradient> {
    let (p, q) = (theta.dim(), psi.dim());
    check_dims(stats, p, q)?;
    if p * q > GRADIENT_ORACLE_MAX_DIM {
        return Err(Error::SizeCap {
            what: "gradient oracle",
            requested: p * q,
            cap: GRADIENT_ORACLE_MAX_DIM,
        });
    }
    let w = dense_covariance(theta, psi)?;
    let mut w_theta = DMatrix::zeros(p, p);
    let mut w_psi = DMatrix::zeros(q, q);
    for i in 0..p {
        for j in 0..p {
            w_theta[(i, j)] = (0..q).map(|k| w[(i * q + k, j * q + k)]).sum();
        }
    }
    for k in 0..q {
        for l in 0..q {
            w_psi[(k, l)] = (0..p).map(|j| w[(j * q + k, j * q + l)]).sum();
        }
    }
    Ok(Gradient {
        g_theta: DenseSymMatrix::symmetrize(stats.s().as_matrix() * q as f64 - w_theta)?,
        g_psi: DenseSymMatrix::symmetrize(stats.t().as_matrix() * p as f64 - w_psi)?,
    })
}

/// `W = (Θ ⊕ Ψ)⁻¹` via Cholesky.
pub(crate) fn dense_covariance(theta: &DenseSymMatrix, psi: &DenseSymMatrix) -> Result<DMatrix<f64>> {
    let omega = kron_sum_dense(theta, psi)?.into_inner();
    let chol = omega.cholesky().ok_or(Error::NotPositiveDefinite {
        min_pair_sum: f64::NAN,
    })?;
    let mut w = chol.inverse();
    crate::matrix::symmetrize_in_place(&mut w);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::sample_stats;
    use crate::testutil::{random_data, random_model, random_stats};
    use nalgebra::DVector;

    fn diag(d: &[f64]) -> DenseSymMatrix {
        DenseSymMatrix::from_diagonal(d)
    }

    fn stats_half(p: usize, q: usize) -> SampleStats {
        SampleStats::from_covariances(
            DenseSymMatrix::identity(p).shifted(-0.5),
            DenseSymMatrix::identity(q).shifted(-0.5),
            1,
        )
        .unwrap()
    }

    #[test]
    fn identity_objective() {
        let (p, q) = (3, 4);
        let st = stats_half(p, q);
        let obj = objective(&st, &KsModel::identity(p, q), 0.3, 0.7).unwrap();
        let pq = (p * q) as f64;
        assert!((obj.g - pq * (1.0 - 2f64.ln())).abs() < 1e-12);
        assert_eq!(obj.h, 0.0);
        assert_eq!(obj.f, obj.g);
    }

    #[test]
    fn objective_matches_dense() {
        let (p, q) = (3, 4);
        let m = random_model(p, q, 11);
        let data = random_data(p, q, 4, 12);
        let st = sample_stats(&data).unwrap();
        let (gt, gp) = (0.2, 0.1);
        let obj = objective(&st, &m, gt, gp).unwrap();
        let omega = kron_sum_dense(m.theta(), m.psi()).unwrap().into_inner();
        let mut cov = DMatrix::zeros(p * q, p * q);
        for y in &data {
            let v = DVector::from_column_slice(y.as_slice());
            cov += &v * v.transpose();
        }
        cov /= data.len() as f64;
        let linear = (cov * &omega).trace();
        let logdet = omega.cholesky().unwrap().determinant().ln();
        let h = 4.0 * gt * m.theta().off_diagonal_l1() + 3.0 * gp * m.psi().off_diagonal_l1();
        let f = linear - logdet + h;
        assert!((obj.f - f).abs() < 1e-9 * f.abs().max(1.0), "{} vs {f}", obj.f);
    }

    #[test]
    fn logdet_matches_dense() {
        for seed in 0..5 {
            let m = random_model(3, 4, seed);
            let omega = kron_sum_dense(m.theta(), m.psi()).unwrap();
            let dense = omega.into_inner().cholesky().unwrap().determinant().ln();
            let ld = ks_logdet(m.eig_theta(), m.eig_psi()).unwrap();
            assert!((ld - dense).abs() <= 1e-8 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn gauge_invariant_objective() {
        let m = random_model(4, 4, 5);
        let st = random_stats(4, 4, 6);
        let a = objective(&st, &m, 0.1, 0.1).unwrap();
        let b = objective(&st, &m.gauge_shift(0.3).unwrap(), 0.1, 0.1).unwrap();
        assert!((a.g - b.g).abs() < 1e-10 * a.g.abs().max(1.0));
        assert!((a.h - b.h).abs() < 1e-12);
    }

    #[test]
    fn identity_gradient() {
        let st = random_stats(3, 2, 1);
        let g = gradient(&st, &KsModel::identity(3, 2)).unwrap();
        let want_t = st.s().as_matrix() * 2.0 - DMatrix::identity(3, 3) * 1.0;
        let want_p = st.t().as_matrix() * 3.0 - DMatrix::identity(2, 2) * 1.5;
        assert!((g.g_theta.as_matrix() - want_t).amax() < 1e-12);
        assert!((g.g_psi.as_matrix() - want_p).amax() < 1e-12);
    }

    #[test]
    fn oracle_small_examples() {
        let zero2 = SampleStats::from_covariances(DenseSymMatrix::zeros(2), DenseSymMatrix::zeros(2), 1).unwrap();
        let g = gradient_oracle(&zero2, &DenseSymMatrix::identity(2), &DenseSymMatrix::identity(2)).unwrap();
        assert!((g.g_theta.as_matrix() + DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!((g.g_psi.as_matrix() + DMatrix::identity(2, 2)).amax() < 1e-14);

        let zero = SampleStats::from_covariances(DenseSymMatrix::zeros(2), DenseSymMatrix::zeros(1), 1).unwrap();
        let g = gradient_oracle(&zero, &diag(&[1.0, 2.0]), &diag(&[3.0])).unwrap();
        assert!((g.g_theta.get(0, 0) + 0.25).abs() < 1e-14);
        assert!((g.g_theta.get(1, 1) + 0.2).abs() < 1e-14);
        assert!((g.g_psi.get(0, 0) + 0.45).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_oracle() {
        for (p, q, seed) in [(3, 4, 1), (4, 3, 2), (2, 6, 3), (5, 5, 4)] {
            let m = random_model(p, q, seed);
            let st = random_stats(p, q, seed + 100);
            let a = gradient(&st, &m).unwrap();
            let b = gradient_oracle(&st, m.theta(), m.psi()).unwrap();
            let scale = b.g_theta.max_abs().max(b.g_psi.max_abs());
            assert!((a.g_theta.as_matrix() - b.g_theta.as_matrix()).amax() <= 1e-8 * scale);
            assert!((a.g_psi.as_matrix() - b.g_psi.as_matrix()).amax() <= 1e-8 * scale);
            let (tt, tp) = (a.g_theta.trace(), a.g_psi.trace());
            assert!((tt - tp).abs() <= 1e-8 * (1.0 + tt.abs()));
        }
    }

    #[test]
    fn gradient_gauge_invariant() {
        let m = random_model(3, 4, 7);
        let st = random_stats(3, 4, 8);
        let shifted = m.gauge_shift(0.7).unwrap();
        let a = gradient(&st, &m).unwrap();
        let b = gradient(&st, &shifted).unwrap();
        assert!((a.g_theta.as_matrix() - b.g_theta.as_matrix()).amax() < 1e-10);
        assert!((a.g_psi.as_matrix() - b.g_psi.as_matrix()).amax() < 1e-10);
    }

    #[test]
    fn finite_differences() {
        let (p, q) = (3, 4);
        let m = random_model(p, q, 21);
        let st = random_stats(p, q, 22);
        let grad = gradient(&st, &m).unwrap();
        let g_at = |theta: DenseSymMatrix| {
            let mm = KsModel::new(theta, m.psi().clone()).unwrap();
            objective(&st, &mm, 0.0, 0.0).unwrap().g
        };
        let eps = 1e-5;
        for i in 0..p {
            for j in i..p {
                let mut e = DMatrix::zeros(p, p);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                let e = DenseSymMatrix::new(e).unwrap();
                let plus = g_at(m.theta().add_scaled(&e, eps).unwrap());
                let minus = g_at(m.theta().add_scaled(&e, -eps).unwrap());
                let fd = (plus - minus) / (2.0 * eps);
                let analytic = if i == j {
                    grad.g_theta.get(i, i)
                } else {
                    2.0 * grad.g_theta.get(i, j)
                };
                assert!(
                    (fd - analytic).abs() <= 1e-4 * analytic.abs().max(1.0),
                    "({i},{j}): fd {fd} vs {analytic}"
                );
            }
        }
    }

    #[test]
    fn rejects_mismatched_dims() {
        let st = random_stats(3, 4, 1);
        assert!(matches!(gradient(&st, &KsModel::identity(4, 3)), Err(Error::Dimension(_))));
        let big = random_stats(15, 15, 1);
        assert!(matches!(
            gradient_oracle(&big, &DenseSymMatrix::identity(15), &DenseSymMatrix::identity(15)),
            Err(Error::SizeCap { .. })
        ));
    }
}
