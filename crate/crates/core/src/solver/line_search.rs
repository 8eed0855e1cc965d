//! Armijo backtracking with a positive-definiteness guard.

use crate::error::{Error, Result};
use crate::matrix::eigendecompose;
use crate::model::KsModel;
use crate::objective::{penalty, smooth_value, Gradient, Objective};
use crate::stats::SampleStats;

use super::cd::DirectionPair;

/// The accepted trial.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub model: KsModel,
    pub objective: Objective,
    pub delta: f64,
    pub backtracks: usize,
}

/// Step-size parameters.
#[derive(Debug, Clone, Copy)]
pub struct ArmijoParams {
    pub sigma: f64,
    pub beta: f64,
    pub max_backtracks: usize,
    pub gamma_theta: f64,
    pub gamma_psi: f64,
}

/// `δ = tr(D_Θ G_Θ) + tr(D_Ψ G_Ψ) + h(X + D) − h(X)`.
pub fn armijo_delta(model: &KsModel, grad: &Gradient, d: &DirectionPair, gamma_theta: f64, gamma_psi: f64) -> Result<f64> {
    let theta_new = model.theta().add_scaled(&d.d_theta, 1.0)?;
    let psi_new = model.psi().add_scaled(&d.d_psi, 1.0)?;
    let h_new = penalty(&theta_new, &psi_new, gamma_theta, gamma_psi);
    let h_old = penalty(model.theta(), model.psi(), gamma_theta, gamma_psi);
    Ok(grad.g_theta.dot(&d.d_theta) + grad.g_psi.dot(&d.d_psi) + h_new - h_old)
}

/// Tries `α = 1, β, β², …` until the Kronecker sum stays positive definite
/// and `f(X + αD) ≤ f(X) + α·σ·δ`. The accepted eigensystems ride along in
/// the returned model.
pub fn line_search(
    stats: &SampleStats,
    model: &KsModel,
    current: &Objective,
    grad: &Gradient,
    d: &DirectionPair,
    params: ArmijoParams,
    iteration: usize,
) -> Result<LineSearchOutcome> {
    let delta = armijo_delta(model, grad, d, params.gamma_theta, params.gamma_psi)?;
    let mut alpha = 1.0;
    let mut last_min_pair_sum = f64::NAN;
    for backtracks in 0..=params.max_backtracks {
        let theta = model.theta().add_scaled(&d.d_theta, alpha)?;
        let psi = model.psi().add_scaled(&d.d_psi, alpha)?;
        let eig_theta = eigendecompose(&theta)?;
        let eig_psi = eigendecompose(&psi)?;
        last_min_pair_sum = eig_theta.min() + eig_psi.min();
        if last_min_pair_sum > 0.0 {
            let g = smooth_value(stats, &theta, &psi, &eig_theta, &eig_psi)?;
            let h = penalty(&theta, &psi, params.gamma_theta, params.gamma_psi);
            let f = g + h;
            if !f.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite objective at iteration {iteration}, step {alpha:e}"
                )));
            }
            if f <= current.f + alpha * params.sigma * delta {
                let model = KsModel::from_parts(theta, psi, eig_theta, eig_psi)?;
                return Ok(LineSearchOutcome {
                    alpha,
                    model,
                    objective: Objective { f, g, h },
                    delta,
                    backtracks,
                });
            }
        }
        alpha *= params.beta;
    }
    Err(Error::LineSearch {
        iteration,
        trials: params.max_backtracks + 1,
        delta,
        last_min_pair_sum,
    })
}
