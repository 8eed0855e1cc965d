//! Coordinate descent on the L1-penalized second-order model.
//!
//! Each block keeps `Z_k = D·V_k` per factor so that `(V_k D V_k)_ij` is a
//! single dot product. In exact mode the Θ–Ψ coupling enters the linear
//! coefficient through `z_k = q_kᵀ D q_k` projections of the other block,
//! mixed by the `λ_W²` grid.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hessian::{build_approx, build_exact, ApproxHessianRep, ExactHessianRep, FactorBlock};
use crate::matrix::DenseSymMatrix;
use crate::model::KsModel;
use crate::objective::Gradient;

use super::active::ActiveSets;

/// The Hessian representation used for one Newton iteration.
#[derive(Debug, Clone)]
pub enum HessianRep {
    Exact(ExactHessianRep),
    Approx(ApproxHessianRep),
}

impl HessianRep {
    /// `k_trunc = 0` builds the exact representation.
    pub fn build(model: &KsModel, k_trunc: usize) -> Result<Self> {
        if k_trunc == 0 {
            Ok(HessianRep::Exact(build_exact(model)?))
        } else {
            Ok(HessianRep::Approx(build_approx(model, k_trunc)?))
        }
    }

    pub fn theta_block(&self) -> &FactorBlock {
        match self {
            HessianRep::Exact(r) => &r.theta,
            HessianRep::Approx(r) => &r.theta,
        }
    }

    pub fn psi_block(&self) -> &FactorBlock {
        match self {
            HessianRep::Exact(r) => &r.psi,
            HessianRep::Approx(r) => &r.psi,
        }
    }

    /// Dense `(p² + q²)`-square matrix. Test-scale only.
    pub fn dense(&self) -> DMatrix<f64> {
        match self {
            HessianRep::Exact(r) => r.dense(),
            HessianRep::Approx(r) => r.dense(),
        }
    }
}

/// Newton direction `(D_Θ, D_Ψ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionPair {
    pub d_theta: DenseSymMatrix,
    pub d_psi: DenseSymMatrix,
}

impl DirectionPair {
    pub fn max_abs(&self) -> f64 {
        self.d_theta.max_abs().max(self.d_psi.max_abs())
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

struct BlockState<'a> {
    block: &'a FactorBlock,
    grad: &'a DMatrix<f64>,
    x: &'a DMatrix<f64>,
    /// Off-diagonal L1 weight `n_other · γ`.
    lambda: f64,
    d: DMatrix<f64>,
    z: Vec<DMatrix<f64>>,
}

impl<'a> BlockState<'a> {
    fn new(block: &'a FactorBlock, grad: &'a DMatrix<f64>, x: &'a DMatrix<f64>, lambda: f64) -> Self {
        let n = x.nrows();
        Self {
            block,
            grad,
            x,
            lambda,
            d: DMatrix::zeros(n, n),
            z: vec![DMatrix::zeros(n, n); block.factors.len()],
        }
    }

    /// Curvature `a` and the linear coefficient without the coupling term.
    fn coefficients(&self, i: usize, j: usize) -> (f64, f64) {
        let mut a = 0.0;
        let mut vdv = 0.0;
        for ((v, z), &w) in self.block.factors.iter().zip(&self.z).zip(&self.block.weights) {
            if i == j {
                a += w * v[(i, i)] * v[(i, i)];
            } else {
                a += w * (v[(i, j)] * v[(i, j)] + v[(i, i)] * v[(j, j)]);
            }
            vdv += w * v.column(i).dot(&z.column(j));
        }
        (a, self.grad[(i, j)] + vdv)
    }

    fn step(&self, i: usize, j: usize, a: f64, b: f64) -> f64 {
        if i == j {
            -b / a
        } else {
            let c = self.x[(i, j)] + self.d[(i, j)];
            -c + soft_threshold(c - b / a, self.lambda / a)
        }
    }

    fn apply(&mut self, i: usize, j: usize, mu: f64) {
        self.d[(i, j)] += mu;
        if i != j {
            self.d[(j, i)] += mu;
        }
        let n = self.d.nrows();
        for (v, z) in self.block.factors.iter().zip(self.z.iter_mut()) {
            for m in 0..n {
                z[(i, m)] += mu * v[(m, j)];
            }
            if i != j {
                for m in 0..n {
                    z[(j, m)] += mu * v[(m, i)];
                }
            }
        }
    }
}

/// Exact-mode coupling state. `z_theta[l] = q_Θ,lᵀ D_Θ q_Θ,l` and
/// `y_theta = λ_W² · z_psi` feeds the Θ coefficients (and symmetrically).
struct Coupling<'a> {
    rep: &'a ExactHessianRep,
    lw2: DMatrix<f64>,
    z_theta: DVector<f64>,
    z_psi: DVector<f64>,
    y_theta: DVector<f64>,
    y_psi: DVector<f64>,
    y_theta_stale: bool,
    y_psi_stale: bool,
}

impl<'a> Coupling<'a> {
    fn new(rep: &'a ExactHessianRep) -> Self {
        let (p, q) = (rep.p(), rep.q());
        Self {
            rep,
            lw2: rep.lambda_w.map(|w| w * w),
            z_theta: DVector::zeros(p),
            z_psi: DVector::zeros(q),
            y_theta: DVector::zeros(p),
            y_psi: DVector::zeros(q),
            y_theta_stale: false,
            y_psi_stale: false,
        }
    }

    fn theta_term(&mut self, i: usize, j: usize) -> f64 {
        if self.y_theta_stale {
            self.y_theta = &self.lw2 * &self.z_psi;
            self.y_theta_stale = false;
        }
        let qt = &self.rep.q_theta;
        (0..qt.ncols()).map(|l| qt[(i, l)] * qt[(j, l)] * self.y_theta[l]).sum()
    }

    fn psi_term(&mut self, k: usize, l: usize) -> f64 {
        if self.y_psi_stale {
            self.y_psi = self.lw2.tr_mul(&self.z_theta);
            self.y_psi_stale = false;
        }
        let qp = &self.rep.q_psi;
        (0..qp.ncols()).map(|m| qp[(k, m)] * qp[(l, m)] * self.y_psi[m]).sum()
    }

    fn record(basis: &DMatrix<f64>, z: &mut DVector<f64>, i: usize, j: usize, mu: f64) {
        let scale = if i == j { mu } else { 2.0 * mu };
        for m in 0..basis.ncols() {
            z[m] += scale * basis[(i, m)] * basis[(j, m)];
        }
    }

    fn theta_moved(&mut self, i: usize, j: usize, mu: f64) {
        Self::record(&self.rep.q_theta, &mut self.z_theta, i, j, mu);
        self.y_psi_stale = true;
    }

    fn psi_moved(&mut self, k: usize, l: usize, mu: f64) {
        Self::record(&self.rep.q_psi, &mut self.z_psi, k, l, mu);
        self.y_theta_stale = true;
    }
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    Theta(usize, usize),
    Psi(usize, usize),
}

/// Penalty weights and sweep count for one direction solve.
#[derive(Debug, Clone, Copy)]
pub struct CdSettings {
    pub gamma_theta: f64,
    pub gamma_psi: f64,
    pub sweeps: usize,
}

/// Runs `sweeps` passes over the active coordinates in a fresh random order
/// each pass, starting from `D = 0`.
pub fn cd_direction(
    model: &KsModel,
    grad: &Gradient,
    rep: &HessianRep,
    active: &ActiveSets,
    settings: CdSettings,
    rng: &mut ChaCha8Rng,
) -> Result<DirectionPair> {
    let (p, q) = (model.p(), model.q());
    let mut theta = BlockState::new(
        rep.theta_block(),
        grad.g_theta.as_matrix(),
        model.theta().as_matrix(),
        q as f64 * settings.gamma_theta,
    );
    let mut psi = BlockState::new(
        rep.psi_block(),
        grad.g_psi.as_matrix(),
        model.psi().as_matrix(),
        p as f64 * settings.gamma_psi,
    );
    let mut coupling = match rep {
        HessianRep::Exact(r) => Some(Coupling::new(r)),
        HessianRep::Approx(_) => None,
    };

    let mut coords: Vec<Coord> = active
        .a_theta
        .iter()
        .map(|&(i, j)| Coord::Theta(i, j))
        .chain(active.a_psi.iter().map(|&(k, l)| Coord::Psi(k, l)))
        .collect();

    for _ in 0..settings.sweeps {
        coords.shuffle(rng);
        for &coord in &coords {
            match coord {
                Coord::Theta(i, j) => {
                    let (a, mut b) = theta.coefficients(i, j);
                    if let Some(c) = coupling.as_mut() {
                        b += c.theta_term(i, j);
                    }
                    check_curvature(a, "theta", i, j)?;
                    let mu = theta.step(i, j, a, b);
                    if mu != 0.0 {
                        theta.apply(i, j, mu);
                        if let Some(c) = coupling.as_mut() {
                            c.theta_moved(i, j, mu);
                        }
                    }
                }
                Coord::Psi(k, l) => {
                    let (a, mut b) = psi.coefficients(k, l);
                    if let Some(c) = coupling.as_mut() {
                        b += c.psi_term(k, l);
                    }
                    check_curvature(a, "psi", k, l)?;
                    let mu = psi.step(k, l, a, b);
                    if mu != 0.0 {
                        psi.apply(k, l, mu);
                        if let Some(c) = coupling.as_mut() {
                            c.psi_moved(k, l, mu);
                        }
                    }
                }
            }
        }
    }

    Ok(DirectionPair {
        d_theta: DenseSymMatrix::new(theta.d)?,
        d_psi: DenseSymMatrix::new(psi.d)?,
    })
}

fn check_curvature(a: f64, block: &str, i: usize, j: usize) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "non-positive curvature {a:e} at {block} coordinate ({i}, {j})"
        )))
    }
}
