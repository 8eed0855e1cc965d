//! Feature and sample covariances of matrix-variate observations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{eigendecompose, DenseSymMatrix};

/// `S` (p×p) and `T` (q×q) summarizing `n` observations of size `q × p`.
#[derive(Debug, Clone)]
pub struct SampleStats {
    s: DenseSymMatrix,
    t: DenseSymMatrix,
    n: usize,
}

impl SampleStats {
    /// Validates externally supplied covariances.
    ///
    /// Both must be positive semi-definite and satisfy `q·tr(S) = p·tr(T)`.
    pub fn from_covariances(s: DenseSymMatrix, t: DenseSymMatrix, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("replicate count must be at least 1".into()));
        }
        for (name, m) in [("S", &s), ("T", &t)] {
            let min = eigendecompose(m)?.min();
            if min < -1e-10 * m.max_abs().max(1.0) {
                return Err(Error::Input(format!(
                    "{name} is not positive semi-definite (min eigenvalue {min:e})"
                )));
            }
        }
        let (p, q) = (s.dim() as f64, t.dim() as f64);
        let lhs = q * s.trace();
        let rhs = p * t.trace();
        if (lhs - rhs).abs() > 1e-8 * lhs.abs() {
            return Err(Error::Input(format!(
                "trace identity violated: q·tr(S) = {lhs}, p·tr(T) = {rhs}"
            )));
        }
        Ok(Self { s, t, n })
    }

    pub fn s(&self) -> &DenseSymMatrix {
        &self.s
    }

    pub fn t(&self) -> &DenseSymMatrix {
        &self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.s.dim()
    }

    pub fn q(&self) -> usize {
        self.t.dim()
    }
}

/// Computes `S = (1/(nq))·Σ YᵀY` and `T = (1/(np))·Σ YYᵀ`.
pub fn sample_stats(data: &[DMatrix<f64>]) -> Result<SampleStats> {
    let first = data
        .first()
        .ok_or_else(|| Error::Input("no observations supplied".into()))?;
    let (q, p) = first.shape();
    if p == 0 || q == 0 {
        return Err(Error::Input("observations must be non-empty".into()));
    }
    let mut s = DMatrix::zeros(p, p);
    let mut t = DMatrix::zeros(q, q);
    for (idx, y) in data.iter().enumerate() {
        if y.shape() != (q, p) {
            return Err(Error::Input(format!(
                "observation {idx} is {}x{}, expected {q}x{p}",
                y.nrows(),
                y.ncols()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("observation {idx} has a non-finite entry")));
        }
        s.gemm_tr(1.0, y, y, 1.0);
        t.gemm(1.0, y, &y.transpose(), 1.0);
    }
    let n = data.len() as f64;
    s /= n * q as f64;
    t /= n * p as f64;
    Ok(SampleStats {
        s: DenseSymMatrix::symmetrize(s)?,
        t: DenseSymMatrix::symmetrize(t)?,
        n: data.len(),
    })
}
