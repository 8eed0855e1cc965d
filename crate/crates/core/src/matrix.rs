//! Dense symmetric matrices and their eigensystems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated when accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense, square, symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix(DMatrix<f64>);

impl DenseSymMatrix {
    /// Validates `m` as square, finite and symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > SYMMETRY_TOL * m[(i, j)].abs().max(1.0) {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
        }
        Ok(Self(m))
    }

    /// Replaces `m` by `(m + mᵀ)/2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        let mut m = m;
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds a matrix from row vectors; rows must all have length `rows.len()`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// `self + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += c;
        }
        Self(m)
    }

    /// `self + alpha·other`, re-symmetrized.
    pub fn add_scaled(&self, other: &DenseSymMatrix, alpha: f64) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} to {}x{}",
                other.dim(),
                other.dim(),
                self.dim(),
                self.dim()
            )));
        }
        Self::symmetrize(&self.0 + &other.0 * alpha)
    }

    /// Sum of |m_ij| over i ≠ j (both triangles).
    pub fn off_diagonal_l1(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    acc += self.0[(i, j)].abs();
                }
            }
        }
        acc
    }

    /// Number of off-diagonal entries (both triangles) with |m_ij| > tol.
    pub fn nnz_off(&self, tol: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        for j in 0..n {
            for i in 0..n {
                if i != j && self.0[(i, j)].abs() > tol {
                    count += 1;
                }
            }
        }
        count
    }

    /// Number of entries (diagonal included) with |m_ij| > tol.
    pub fn nnz(&self, tol: f64) -> usize {
        self.0.iter().filter(|v| v.abs() > tol).count()
    }

    /// Frobenius inner product `tr(self · other)` for symmetric operands.
    pub fn dot(&self, other: &DenseSymMatrix) -> f64 {
        self.0.dot(&other.0)
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
        let n = m.nrows().max(1);
        return Err(Error::Input(format!(
            "non-finite entry at ({}, {})",
            idx % n,
            idx / n
        )));
    }
    Ok(())
}

/// Orthonormal eigenvectors (columns of `vectors`) and ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// The eigensystem of `m + c·I`: same vectors, shifted values.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            vectors: self.vectors.clone(),
            values: self.values.add_scalar(c),
        }
    }

    /// `Q · diag(f(λ)) · Qᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        let mut out = &scaled * self.vectors.transpose();
        symmetrize_in_place(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.spectral_map(|l| l)
    }
}

/// Full symmetric eigendecomposition with eigenvalues in ascending order.
pub fn eigendecompose(m: &DenseSymMatrix) -> Result<EigenSystem> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let raw = m.as_matrix().clone();
    let eig = SymmetricEigen::try_new(raw, f64::EPSILON, 1000 * n.max(10)).ok_or_else(|| {
        Error::EigenNonConvergence {
            n,
            max_abs: m.max_abs(),
            frobenius: m.as_matrix().norm(),
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenSystem { vectors, values })
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
