use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("Kronecker sum is not positive definite (smallest eigenvalue pair sum {min_pair_sum:e})")]
    NotPositiveDefinite { min_pair_sum: f64 },

    #[error(
        "symmetric eigensolver did not converge on a {n}x{n} matrix \
         (max |entry| {max_abs:e}, Frobenius norm {frobenius:e})"
    )]
    EigenNonConvergence {
        n: usize,
        max_abs: f64,
        frobenius: f64,
    },

    #[error("size cap exceeded for {what}: {requested} > {cap}")]
    SizeCap {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("degenerate gauge: trace of theta would be {trace_theta:e} after adjustment")]
    DegenerateGauge { trace_theta: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(
        "line search failed at iteration {iteration} after {trials} trials \
         (delta {delta:e}, last min eigenvalue pair sum {last_min_pair_sum:e})"
    )]
    LineSearch {
        iteration: usize,
        trials: usize,
        delta: f64,
        last_min_pair_sum: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("graph generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
