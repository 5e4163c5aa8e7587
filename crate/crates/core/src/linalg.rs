//! Dense symmetric matrices with a cached, descending spectral decomposition.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenpairs with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectral {
    pub fn top(&self) -> (f64, DVector<f64>) {
        (self.values[0], self.vectors.column(0).into_owned())
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        let mut out = scaled * self.vectors.transpose();
        symmetrize(&mut out);
        out
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<Spectral> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectral {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100_000).ok_or_else(|| {
        Error::numeric(format!(
            "symmetric eigensolver did not converge (n = {n}, max |entry| = {:.3e})",
            m.amax()
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Spectral { values, vectors })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
    spectral: OnceLock<Spectral>,
}

impl SymmetricMatrix {
    /// Symmetrizes `(m + mᵀ)/2`. Rejects non-square or non-finite input.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        symmetrize(&mut m);
        Ok(Self {
            data: m,
            spectral: OnceLock::new(),
        })
    }

    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_spectral(DVector::zeros(n), DMatrix::identity(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::from_spectral(DVector::from_element(n, s), DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            spectral: OnceLock::new(),
        }
    }

    /// Builds `U diag(values) Uᵀ` and caches the decomposition. `vectors` must be orthonormal.
    pub fn from_spectral(values: DVector<f64>, vectors: DMatrix<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let sorted_vals = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
        let mut sorted_vecs = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted_vecs.set_column(dst, &vectors.column(src));
        }
        let spectral = Spectral {
            values: sorted_vals,
            vectors: sorted_vecs,
        };
        let data = spectral.reconstruct();
        let cell = OnceLock::new();
        let _ = cell.set(spectral);
        Self {
            data,
            spectral: cell,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn spectral(&self) -> Result<&Spectral> {
        if let Some(s) = self.spectral.get() {
            return Ok(s);
        }
        let s = symmetric_eigen(&self.data)?;
        Ok(self.spectral.get_or_init(|| s))
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectral()?.values.get(0).copied().unwrap_or(0.0))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let s = self.spectral()?;
        Ok(s.values
            .get(s.values.len().wrapping_sub(1))
            .copied()
            .unwrap_or(0.0))
    }

    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        (&self.data * x).dot(x)
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.data * x
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// `self + alpha * p pᵀ` (spectral cache dropped).
    pub fn rank_one_update(&self, alpha: f64, p: &DVector<f64>) -> Self {
        let mut m = self.data.clone();
        m.ger(alpha, p, p, 1.0);
        symmetrize(&mut m);
        Self {
            data: m,
            spectral: OnceLock::new(),
        }
    }

    pub fn frobenius_distance(&self, other: &SymmetricMatrix) -> f64 {
        (&self.data - &other.data).norm()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// `Qᵀ X Q` for an orthogonal change of basis.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Self {
        let mut m = q.transpose() * &self.data * q;
        symmetrize(&mut m);
        Self {
            data: m,
            spectral: OnceLock::new(),
        }
    }
}

/// Row-major matrix record used for JSON interchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::invalid(format!(
                "matrix record declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&SymmetricMatrix> for MatrixRecord {
    fn from(m: &SymmetricMatrix) -> Self {
        MatrixRecord::from_matrix(m.as_matrix())
    }
}

/// Top eigenpair of the pencil `(X, diag(b))` with `b > 0`.
/// Returns `(lambda, p)` with `pᵀ diag(b) p = 1`.
pub(crate) fn top_pencil_diag(
    x: &DMatrix<f64>,
    b: &[f64],
) -> Result<(f64, DVector<f64>, Spectral)> {
    let n = x.nrows();
    let s: Vec<f64> = b.iter().map(|v| 1.0 / v.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| x[(i, j)] * s[i] * s[j]);
    let spec = symmetric_eigen(&scaled)?;
    let lambda = spec.values[0];
    let p = DVector::from_fn(n, |i, _| spec.vectors[(i, 0)] * s[i]);
    Ok((lambda, p, spec))
}

/// Top eigenpair of the pencil `(X, B)` with `B` symmetric positive definite.
pub(crate) fn top_pencil(x: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric("pencil matrix is not positive definite"))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric("pencil factor is singular"))?;
    let mut s = &linv * x * linv.transpose();
    symmetrize(&mut s);
    let spec = symmetric_eigen(&s)?;
    let u = spec.vectors.column(0).into_owned();
    let p = linv.transpose() * u;
    Ok((spec.values[0], p))
}
