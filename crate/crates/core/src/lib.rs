//! Sparse Kronecker-sum inverse covariance estimation.
//!
//! Estimates a feature graph `Θ` and a sample graph `Ψ` whose Kronecker sum
//! `Θ ⊕ Ψ` is the precision matrix of a matrix-variate Gaussian. The solver
//! is a proximal Newton method whose Hessian is expressed through the
//! eigendecompositions of `Θ` and `Ψ`, either exactly or truncated to the
//! `K` smallest co-eigenvalues.

pub mod error;
pub mod evaluate;
pub mod hessian;
pub mod io;
pub mod matrix;
pub mod model;
pub mod objective;
pub mod simulate;
pub mod solver;
pub mod stats;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use matrix::{eigendecompose, DenseSymMatrix, EigenSystem};
pub use model::{adjust_trace_ratio, identify_diagonals, kron_sum_dense, ks_logdet, DiagonalSums, KsModel};
pub use objective::{gradient, gradient_oracle, objective, Gradient, Objective};
pub use stats::{sample_stats, SampleStats};
