//! Proximal Newton solver.
//!
//! Each iteration eigendecomposes nothing new: the eigensystems accepted by
//! the previous line search feed the gradient, the Hessian representation,
//! the coordinate-descent direction and the next line search. The trace
//! ratio is fixed once, after the loop.

mod active;
mod cd;
mod config;
mod line_search;
mod trace;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{adjust_trace_ratio, KsModel};
use crate::objective::{gradient, objective, Gradient, Objective};
use crate::stats::SampleStats;

pub use active::{
    detect_active_sets, partition_from_labels, screen_blocks, screening_masks, threshold_components, ActiveSets,
    FixedMask, ScreenMasks,
};
pub use cd::{cd_direction, CdSettings, DirectionPair, HessianRep};
pub use config::{SolverConfig, SweepSchedule};
pub use line_search::{armijo_delta, line_search, ArmijoParams, LineSearchOutcome};
pub use trace::{check_convergence, IterRecord, SolverTrace, Termination, TRACE_HEADER};

/// A direction below this magnitude counts as zero.
pub const ZERO_STEP_TOL: f64 = 1e-12;

/// What one Newton iteration did.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub iteration: usize,
    pub direction: DirectionPair,
    pub delta: f64,
    pub alpha: f64,
    pub objective: Objective,
    pub backtracks: usize,
    pub active_theta: usize,
    pub active_psi: usize,
    /// Set when this step ended the fit.
    pub termination: Option<Termination>,
}

/// Gauge-fixed estimate and its trace.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: KsModel,
    pub trace: SolverTrace,
    pub termination: Termination,
}

/// Stepwise driver. [`fit`] runs it to completion; tests and the CLI step it
/// by hand to inspect or regauge intermediate iterates.
#[derive(Debug)]
pub struct Solver<'a> {
    stats: &'a SampleStats,
    cfg: SolverConfig,
    masks: ScreenMasks,
    model: KsModel,
    objective: Objective,
    iteration: usize,
    rng: ChaCha8Rng,
    trace: SolverTrace,
}

impl<'a> Solver<'a> {
    /// Starts from `Θ = I_p`, `Ψ = I_q`.
    pub fn new(stats: &'a SampleStats, cfg: SolverConfig) -> Result<Self> {
        Self::with_initial(stats, cfg, KsModel::identity(stats.p(), stats.q()))
    }

    pub fn with_initial(stats: &'a SampleStats, cfg: SolverConfig, model: KsModel) -> Result<Self> {
        let (p, q) = (stats.p(), stats.q());
        cfg.validate(p, q)?;
        if model.p() != p || model.q() != q {
            return Err(Error::Dimension(format!(
                "initial model is {}x{}, statistics are {p}x{q}",
                model.p(),
                model.q()
            )));
        }
        let masks = if cfg.screening {
            screening_masks(stats, cfg.gamma_theta, cfg.gamma_psi)
        } else {
            ScreenMasks::none(p, q)
        };
        let objective = objective(stats, &model, cfg.gamma_theta, cfg.gamma_psi)?;
        let trace = SolverTrace {
            records: vec![IterRecord {
                iter: 0,
                f: objective.f,
                g: objective.g,
                h: objective.h,
                alpha: 0.0,
                active_theta: 0,
                active_psi: 0,
                backtracks: 0,
                seconds: 0.0,
            }],
            termination: None,
        };
        Ok(Self {
            stats,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            cfg,
            masks,
            model,
            objective,
            iteration: 0,
            trace,
        })
    }

    pub fn model(&self) -> &KsModel {
        &self.model
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn trace(&self) -> &SolverTrace {
        &self.trace
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn masks(&self) -> &ScreenMasks {
        &self.masks
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.trace.termination.is_some()
    }

    /// Tightens the tolerance and cap so a converged or capped fit can keep
    /// going from where it stopped. A stationary fit stays finished.
    pub fn refine(&mut self, epsilon: f64, max_newton_iters: usize) -> Result<()> {
        let cfg = SolverConfig {
            epsilon,
            max_newton_iters,
            ..self.cfg.clone()
        };
        cfg.validate(self.stats.p(), self.stats.q())?;
        self.cfg = cfg;
        if self.trace.termination != Some(Termination::Stationary) {
            self.trace.termination = None;
        }
        Ok(())
    }

    /// Moves the current iterate to trace ratio `rho` without changing `Θ ⊕ Ψ`.
    pub fn regauge(&mut self, rho: f64) -> Result<()> {
        self.model = adjust_trace_ratio(&self.model, rho)?;
        self.objective = objective(self.stats, &self.model, self.cfg.gamma_theta, self.cfg.gamma_psi)?;
        Ok(())
    }

    /// Replaces the iterate by `(Θ + cI, Ψ − cI)`.
    pub fn gauge_shift(&mut self, c: f64) -> Result<()> {
        self.model = self.model.gauge_shift(c)?;
        self.objective = objective(self.stats, &self.model, self.cfg.gamma_theta, self.cfg.gamma_psi)?;
        Ok(())
    }

    fn gradient(&self) -> Result<Gradient> {
        gradient(self.stats, &self.model)
    }

    /// One Newton iteration. Errors leave the solver at the last accepted
    /// iterate.
    pub fn step(&mut self) -> Result<StepReport> {
        let started = Instant::now();
        let t = self.iteration;
        let grad = self.gradient()?;
        let active = detect_active_sets(&self.model, &grad, self.cfg.gamma_theta, self.cfg.gamma_psi, &self.masks);
        let rep = HessianRep::build(&self.model, self.cfg.k_trunc)?;
        let settings = CdSettings {
            gamma_theta: self.cfg.gamma_theta,
            gamma_psi: self.cfg.gamma_psi,
            sweeps: self.cfg.sweep_schedule.sweeps(t),
        };
        let direction = cd_direction(&self.model, &grad, &rep, &active, settings, &mut self.rng)?;
        drop(rep);
        self.iteration += 1;

        let (alpha, delta, backtracks, stationary) = if direction.max_abs() <= ZERO_STEP_TOL {
            (0.0, 0.0, 0, true)
        } else {
            let params = ArmijoParams {
                sigma: self.cfg.sigma,
                beta: self.cfg.beta,
                max_backtracks: self.cfg.max_backtracks,
                gamma_theta: self.cfg.gamma_theta,
                gamma_psi: self.cfg.gamma_psi,
            };
            let out = line_search(self.stats, &self.model, &self.objective, &grad, &direction, params, self.iteration)?;
            self.model = out.model;
            self.objective = out.objective;
            (out.alpha, out.delta, out.backtracks, false)
        };

        self.trace.records.push(IterRecord {
            iter: self.iteration,
            f: self.objective.f,
            g: self.objective.g,
            h: self.objective.h,
            alpha,
            active_theta: active.a_theta.len(),
            active_psi: active.a_psi.len(),
            backtracks,
            seconds: started.elapsed().as_secs_f64(),
        });

        let termination = if stationary {
            Some(Termination::Stationary)
        } else if check_convergence(&self.trace.f_values(), self.cfg.epsilon, self.cfg.consecutive_required) {
            Some(Termination::Converged)
        } else if self.iteration >= self.cfg.max_newton_iters {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        self.trace.termination = termination;

        Ok(StepReport {
            iteration: self.iteration,
            direction,
            delta,
            alpha,
            objective: self.objective,
            backtracks,
            active_theta: active.a_theta.len(),
            active_psi: active.a_psi.len(),
            termination,
        })
    }

    /// Steps until a termination condition fires.
    pub fn run(&mut self) -> Result<Termination> {
        if self.cfg.max_newton_iters == 0 {
            self.trace.termination = Some(Termination::MaxIterations);
        }
        while self.trace.termination.is_none() {
            self.step()?;
        }
        Ok(self.trace.termination.expect("loop exits on termination"))
    }

    /// Fixes the trace ratio and hands back the estimate.
    pub fn finish(self) -> Result<FitResult> {
        let rho = self.cfg.rho_for(self.stats.p(), self.stats.q());
        let model = adjust_trace_ratio(&self.model, rho)?;
        let termination = self.trace.termination.unwrap_or(Termination::MaxIterations);
        let mut trace = self.trace;
        trace.termination = Some(termination);
        Ok(FitResult {
            model,
            trace,
            termination,
        })
    }
}

/// Full fit from the identity start.
pub fn fit(stats: &SampleStats, cfg: &SolverConfig) -> Result<FitResult> {
    let mut solver = Solver::new(stats, cfg.clone())?;
    solver.run()?;
    solver.finish()
}
