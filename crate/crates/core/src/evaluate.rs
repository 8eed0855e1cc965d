//! Support recovery, BIC selection and error norms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DenseSymMatrix;
use crate::model::{adjust_trace_ratio, KsModel};
use crate::objective::smooth_value;
use crate::solver::{FitResult, Solver, SolverConfig};
use crate::stats::SampleStats;

/// Magnitude above which an estimated entry counts as an edge.
pub const EDGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PRPoint {
    pub gamma: f64,
    pub precision: f64,
    pub recall: f64,
    /// Upper-triangle edges in the estimate.
    pub nnz_theta: usize,
    pub nnz_psi: usize,
}

impl PRPoint {
    pub fn f1(&self) -> f64 {
        let s = self.precision + self.recall;
        if s == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / s
        }
    }
}

/// A grid point whose fit failed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFailure {
    pub gamma: f64,
    pub message: String,
}

/// One fit of a γ grid.
#[derive(Debug)]
pub struct GridFit {
    pub gamma: f64,
    pub outcome: Result<FitResult>,
}

/// Upper-triangle off-diagonal pairs with `|m_ij| > tol`.
pub fn edge_set(m: &DenseSymMatrix, tol: f64) -> Vec<(usize, usize)> {
    let n = m.dim();
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if m.get(i, j).abs() > tol {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn overlap(est: &DenseSymMatrix, truth: &DenseSymMatrix) -> (usize, usize, usize) {
    let n = est.dim();
    let (mut both, mut est_count, mut true_count) = (0, 0, 0);
    for j in 0..n {
        for i in 0..j {
            let e = est.get(i, j).abs() > EDGE_TOL;
            let t = truth.get(i, j).abs() > EDGE_TOL;
            both += usize::from(e && t);
            est_count += usize::from(e);
            true_count += usize::from(t);
        }
    }
    (both, est_count, true_count)
}

fn check_dims(est: &DenseSymMatrix, truth: &DenseSymMatrix, what: &str) -> Result<()> {
    if est.dim() != truth.dim() {
        return Err(Error::Dimension(format!(
            "{what}: estimate is {0}x{0}, truth is {1}x{1}",
            est.dim(),
            truth.dim()
        )));
    }
    Ok(())
}

/// Precision and recall of the pooled Θ and Ψ supports. An empty estimate
/// has precision 1; an empty truth has recall 1.
pub fn support_pr(
    est_theta: &DenseSymMatrix,
    est_psi: &DenseSymMatrix,
    true_theta: &DenseSymMatrix,
    true_psi: &DenseSymMatrix,
    gamma: f64,
) -> Result<PRPoint> {
    check_dims(est_theta, true_theta, "theta")?;
    check_dims(est_psi, true_psi, "psi")?;
    let (bt, et, tt) = overlap(est_theta, true_theta);
    let (bp, ep, tp) = overlap(est_psi, true_psi);
    let (both, est, truth) = (bt + bp, et + ep, tt + tp);
    Ok(PRPoint {
        gamma,
        precision: if est == 0 { 1.0 } else { both as f64 / est as f64 },
        recall: if truth == 0 { 1.0 } else { both as f64 / truth as f64 },
        nnz_theta: et,
        nnz_psi: ep,
    })
}

/// Fraction of all off-diagonal pairs that are true edges; the precision of
/// a random guess.
pub fn edge_density(true_theta: &DenseSymMatrix, true_psi: &DenseSymMatrix) -> f64 {
    let (p, q) = (true_theta.dim(), true_psi.dim());
    let pairs = p * (p - 1) / 2 + q * (q - 1) / 2;
    if pairs == 0 {
        return 0.0;
    }
    let edges = edge_set(true_theta, EDGE_TOL).len() + edge_set(true_psi, EDGE_TOL).len();
    edges as f64 / pairs as f64
}

/// Geometric grid of `count` values from the smallest γ giving a diagonal
/// estimate down to `min_ratio` times that.
pub fn gamma_grid(stats: &SampleStats, count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if count == 0 || !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(Error::Input(format!(
            "grid needs count >= 1 and ratio in (0, 1], got {count} and {min_ratio}"
        )));
    }
    let max_off = |m: &DenseSymMatrix| {
        let n = m.dim();
        let mut best = 0.0_f64;
        for j in 0..n {
            for i in 0..j {
                best = best.max(m.get(i, j).abs());
            }
        }
        best
    };
    let top = max_off(stats.s()).max(max_off(stats.t()));
    if top == 0.0 {
        return Err(Error::Input("sample covariances are diagonal; no informative grid".into()));
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|i| top * (step * i as f64).exp()).collect())
}

/// Fits every γ (applied to both graphs) with the current rayon pool.
pub fn fit_grid(stats: &SampleStats, grid: &[f64], cfg_base: &SolverConfig) -> Vec<GridFit> {
    grid.par_iter()
        .map(|&gamma| {
            let cfg = SolverConfig {
                gamma_theta: gamma,
                gamma_psi: gamma,
                ..cfg_base.clone()
            };
            GridFit {
                gamma,
                outcome: crate::solver::fit(stats, &cfg),
            }
        })
        .collect()
}

/// PR curve over a γ grid. Failed fits are reported in place.
pub fn pr_curve(
    stats: &SampleStats,
    truth: (&DenseSymMatrix, &DenseSymMatrix),
    gamma_grid: &[f64],
    cfg_base: &SolverConfig,
) -> Result<Vec<std::result::Result<PRPoint, GridFailure>>> {
    if gamma_grid.is_empty() {
        return Err(Error::Input("gamma grid is empty".into()));
    }
    if truth.0.dim() != stats.p() || truth.1.dim() != stats.q() {
        return Err(Error::Dimension(format!(
            "truth is {}x{} / {}x{}, data has p={} q={}",
            truth.0.dim(),
            truth.0.dim(),
            truth.1.dim(),
            truth.1.dim(),
            stats.p(),
            stats.q()
        )));
    }
    Ok(fit_grid(stats, gamma_grid, cfg_base)
        .into_iter()
        .map(|g| points_from_fit(&g, truth))
        .collect())
}

/// PR point for a finished grid fit.
pub fn points_from_fit(
    fit: &GridFit,
    truth: (&DenseSymMatrix, &DenseSymMatrix),
) -> std::result::Result<PRPoint, GridFailure> {
    let failure = |e: &Error| GridFailure {
        gamma: fit.gamma,
        message: e.to_string(),
    };
    let res = fit.outcome.as_ref().map_err(failure)?;
    support_pr(res.model.theta(), res.model.psi(), truth.0, truth.1, fit.gamma).map_err(|e| failure(&e))
}

/// Area under a PR curve by the trapezoid rule over recall, anchored at
/// recall 0 with the precision of the lowest-recall point and at recall 1
/// with `baseline`.
pub fn pr_auc(points: &[PRPoint], baseline: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    if pts.is_empty() {
        return 0.5 * baseline;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    if pts[0].0 > 0.0 {
        pts.insert(0, (0.0, pts[0].1));
    }
    if pts[pts.len() - 1].0 < 1.0 {
        pts.push((1.0, baseline));
    }
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1)).sum()
}

/// `2·n·g + log(max(n, 2))·(edges(Θ) + edges(Ψ) + p + q)`; lower is better.
pub fn bic(stats: &SampleStats, model: &KsModel) -> Result<f64> {
    if stats.p() != model.p() || stats.q() != model.q() {
        return Err(Error::Dimension(format!(
            "model is p={} q={}, data is p={} q={}",
            model.p(),
            model.q(),
            stats.p(),
            stats.q()
        )));
    }
    let g = smooth_value(stats, model.theta(), model.psi(), model.eig_theta(), model.eig_psi())?;
    let n = stats.n();
    let params = model.theta().nnz_off(EDGE_TOL) / 2 + model.psi().nnz_off(EDGE_TOL) / 2 + model.p() + model.q();
    Ok(2.0 * n as f64 * g + (n.max(2) as f64).ln() * params as f64)
}

/// Stacked Frobenius distance after moving both models to trace ratio `rho`.
pub fn error_norm(model: &KsModel, reference: &KsModel, rho: f64) -> Result<f64> {
    if model.p() != reference.p() || model.q() != reference.q() {
        return Err(Error::Dimension(format!(
            "model is p={} q={}, reference is p={} q={}",
            model.p(),
            model.q(),
            reference.p(),
            reference.q()
        )));
    }
    let a = adjust_trace_ratio(model, rho)?;
    let b = adjust_trace_ratio(reference, rho)?;
    let dt = a.theta().as_matrix() - b.theta().as_matrix();
    let dp = a.psi().as_matrix() - b.psi().as_matrix();
    Ok((dt.norm_squared() + dp.norm_squared()).sqrt())
}

/// Error and objective at every iterate of a fit, starting from the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSequence {
    pub errors: Vec<f64>,
    pub f: Vec<f64>,
}

/// Runs a fit and records the distance to `reference` after each step.
pub fn error_sequence(stats: &SampleStats, cfg: &SolverConfig, reference: &KsModel) -> Result<ErrorSequence> {
    let rho = cfg.rho_for(stats.p(), stats.q());
    let mut solver = Solver::new(stats, cfg.clone())?;
    let mut errors = vec![error_norm(solver.model(), reference, rho)?];
    let mut f = vec![solver.objective().f];
    while !solver.is_done() {
        solver.step()?;
        errors.push(error_norm(solver.model(), reference, rho)?);
        f.push(solver.objective().f);
    }
    Ok(ErrorSequence { errors, f })
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
