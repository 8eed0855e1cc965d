use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Why a fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative objective change stayed below tolerance long enough.
    Converged,
    /// The Newton direction vanished.
    Stationary,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Stationary => "stationary",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

/// One row of the trace. Row 0 holds the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub alpha: f64,
    pub active_theta: usize,
    pub active_psi: usize,
    pub backtracks: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    pub termination: Option<Termination>,
}

pub const TRACE_HEADER: &str = "iter,f,g,h,alpha,active_theta,active_psi,backtracks,seconds";

impl SolverTrace {
    pub fn f_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }

    /// Newton iterations taken (the starting row is not counted).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// CSV text. Wall times are left blank unless `record_time` is set, so
    /// identical runs produce identical bytes.
    pub fn to_csv(&self, record_time: bool) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let seconds = if record_time { r.seconds.to_string() } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iter, r.f, r.g, r.h, r.alpha, r.active_theta, r.active_psi, r.backtracks, seconds
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path, record_time: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(record_time))?;
        Ok(())
    }
}

/// True when each of the last `required` relative changes
/// `|f_t − f_{t−1}| / |f_t|` is below `epsilon`.
pub fn check_convergence(f: &[f64], epsilon: f64, required: usize) -> bool {
    if required == 0 || f.len() < required + 1 {
        return false;
    }
    f.windows(2)
        .rev()
        .take(required)
        .all(|w| (w[1] - w[0]).abs() < epsilon * w[1].abs())
}
