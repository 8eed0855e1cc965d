use crate::error::{Error, Result};

/// Inner coordinate-descent sweeps per Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSchedule {
    /// `min(1 + ⌊t/3⌋, 20)` at zero-based Newton iteration `t`.
    Increasing,
    Fixed(usize),
}

impl SweepSchedule {
    pub fn sweeps(&self, iteration: usize) -> usize {
        match *self {
            SweepSchedule::Increasing => (1 + iteration / 3).min(20),
            SweepSchedule::Fixed(n) => n,
        }
    }
}

impl Default for SweepSchedule {
    fn default() -> Self {
        SweepSchedule::Increasing
    }
}

/// Solver settings. `k_trunc = 0` selects the exact Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma_theta: f64,
    pub gamma_psi: f64,
    pub k_trunc: usize,
    /// Target `tr(Ψ)/tr(Θ)`; `None` means `q/p`.
    pub rho: Option<f64>,
    pub epsilon: f64,
    pub consecutive_required: usize,
    pub max_newton_iters: usize,
    pub sigma: f64,
    pub beta: f64,
    pub max_backtracks: usize,
    pub sweep_schedule: SweepSchedule,
    pub rng_seed: u64,
    pub screening: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma_theta: 0.1,
            gamma_psi: 0.1,
            k_trunc: 1,
            rho: None,
            epsilon: 1e-3,
            consecutive_required: 3,
            max_newton_iters: 100,
            sigma: 1e-3,
            beta: 0.5,
            max_backtracks: 40,
            sweep_schedule: SweepSchedule::Increasing,
            rng_seed: 0,
            screening: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Input(msg));
        if !(self.gamma_theta > 0.0 && self.gamma_theta.is_finite())
            || !(self.gamma_psi > 0.0 && self.gamma_psi.is_finite())
        {
            return bad(format!(
                "regularization must be positive, got gamma_theta={} gamma_psi={}",
                self.gamma_theta, self.gamma_psi
            ));
        }
        if self.k_trunc > p.min(q) {
            return bad(format!("k_trunc = {} exceeds min(p, q) = {}", self.k_trunc, p.min(q)));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return bad(format!("rho must be positive, got {rho}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.consecutive_required == 0 {
            return bad("consecutive_required must be at least 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return bad(format!("sigma must lie in (0, 0.5), got {}", self.sigma));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if self.max_backtracks == 0 {
            return bad("max_backtracks must be at least 1".into());
        }
        if self.sweep_schedule == SweepSchedule::Fixed(0) {
            return bad("a fixed sweep schedule needs at least one sweep".into());
        }
        Ok(())
    }

    /// The trace ratio in effect for a `p × q` problem.
    pub fn rho_for(&self, p: usize, q: usize) -> f64 {
        self.rho.unwrap_or(q as f64 / p as f64)
    }
}
