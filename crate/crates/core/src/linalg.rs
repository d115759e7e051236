//! Dense complex linear algebra: Hermiticity validation, the classical
//! spectral decomposition that drives the measurement simulator, and
//! null-space extraction.
//!
//! Storage and the underlying eigen/SVD kernels come from `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative singular-value cutoff used by [`null_space`] when callers have no
/// better information.
pub const DEFAULT_NULL_TOL: f64 = 1e-9;

const EIGEN_EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A finite complex matrix of arbitrary shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(CMatrix);

impl ComplexMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    /// Build from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch { rows, cols, got: entries.len() });
        }
        Self::new(CMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }
}

impl From<HermitianMatrix> for ComplexMatrix {
    fn from(h: HermitianMatrix) -> Self {
        Self(h.0)
    }
}

/// A square matrix equal to its own conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Wrap a matrix already known to be Hermitian. Only for crate-internal
    /// constructions that symmetrize by hand.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    /// `(M + M^H) / 2` with exactly real diagonal, without any tolerance check.
    pub fn symmetrize(m: &CMatrix) -> Self {
        let mut h = (m + m.adjoint()).scale(0.5);
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
        }
        Self(h)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x)));
        Self(DMatrix::from_diagonal(&d))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.0)
    }

    /// `<v|M|v>`, real by Hermiticity.
    pub fn expectation(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.0 * v)).re
    }

    /// Real interval containing every eigenvalue.
    pub fn gershgorin_interval(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let radius: f64 = (0..n).filter(|&j| j != i).map(|j| self.0[(i, j)].norm()).sum();
            let centre = self.0[(i, i)].re;
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        (lo, hi)
    }

    /// `self - shift * E`
    pub fn shifted(&self, shift: f64) -> CMatrix {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= c(shift);
        }
        m
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Accept `m` as Hermitian if `max |M - M^H| <= tol * max(1, max |M|)`, returning
/// the symmetrized matrix.
pub fn validate_hermitian(m: &ComplexMatrix, tol: f64) -> Result<HermitianMatrix> {
    let m = m.as_matrix();
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let deviation = max_abs(&(m - m.adjoint()));
    let bound = tol * max_abs(m).max(1.0);
    if deviation > bound {
        return Err(Error::HermiticityViolation { deviation, tol: bound });
    }
    Ok(HermitianMatrix::symmetrize(m))
}

/// Eigenvalues in ascending order with matching unit eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k).into_owned()
    }

    /// `sum_k lambda_k v_k v_k^H`
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            out += (v * v.adjoint()).scale(lambda);
        }
        out
    }
}

/// Full classical eigendecomposition of a Hermitian matrix.
pub fn spectral_oracle(a: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), EIGEN_EPS, MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Orthonormal basis of the numerical kernel of `m`: right singular vectors
/// whose singular value is at most `tol` times the largest one.
pub fn null_space(m: &ComplexMatrix, tol: f64) -> Result<Vec<CVector>> {
    let m = m.as_matrix();
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows();
    let svd = SVD::try_new(m.clone(), false, true, EIGEN_EPS, MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let v_t = svd.v_t.ok_or(Error::ConvergenceFailure)?;
    let largest = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = tol * largest;
    let mut out = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= cutoff {
            out.push(CVector::from_iterator(n, v_t.row(k).iter().map(|z| z.conj())));
        }
    }
    Ok(out)
}

/// Serialize complex vectors as nested `[re, im]` pairs.
pub(crate) fn serialize_cvectors<S: serde::Serializer>(vs: &[CVector], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        seq.serialize_element(&pairs)?;
    }
    seq.end()
}

pub(crate) fn serialize_cvector<S: serde::Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}
