//! Dense complex-matrix primitives.
//!
//! Everything here works on small dense matrices (dimension at most a few
//! dozen). Matrices are plain values; the only invariant-carrying type is
//! [`HermitianMatrix`], which is guaranteed Hermitian up to round-off.
//!
//! Single-qubit operators use the basis ordering `|g⟩ = index 0`,
//! `|e⟩ = index 1`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

const EIG_MAX_ITER: usize = 10_000;

/// Relative tolerance used when accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative eigenvalue floor for positive-semidefinite checks.
pub const PSD_FLOOR: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if it is square, finite and Hermitian within
    /// `HERMITIAN_TOL · (1 + max|entry|)`. The stored value is symmetrized.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_finite(&m, "Hermitian candidate")?;
        let dev = hermitian_deviation(&m)?;
        let scale = 1.0 + max_abs(&m);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (max deviation {dev:e})"
            )));
        }
        hermitize(&m)
    }

    /// Wraps a matrix the caller has already symmetrized.
    pub(crate) fn from_hermitian_unchecked(m: ComplexMatrix) -> Self {
        debug_assert!(m.is_square());
        HermitianMatrix(m)
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(ComplexMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x, 0.0)));
        HermitianMatrix(ComplexMatrix::from_diagonal(&v))
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn projector(v: &ComplexVector) -> Self {
        HermitianMatrix(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace_re(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(&self.0 * c(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        HermitianMatrix(&self.0 - &other.0)
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_hermitian(self)?.values.first().copied().unwrap_or(0.0))
    }

    /// PSD test with eigenvalue floor `-floor · max(1, ‖A‖)`.
    pub fn is_psd(&self, floor: f64) -> Result<bool> {
        let scale = spectral_scale(&self.0).max(1.0);
        Ok(self.min_eigenvalue()? >= -floor * scale)
    }
}

impl Deref for HermitianMatrix {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// `V · diag(f(λ)) · V†`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let w = c(f(lam), 0.0);
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        let m = &scaled * self.vectors.adjoint();
        HermitianMatrix(symmetrized(&m))
    }
}

pub fn check_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermitian_deviation(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    Ok(dev)
}

fn symmetrized(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// `(M + M†) / 2`.
pub fn hermitize(m: &ComplexMatrix) -> Result<HermitianMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "hermitize needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(HermitianMatrix(symmetrized(m)))
}

/// Frobenius norm used as the scale for tolerances.
pub fn spectral_scale(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    if n == 1 {
        return Ok(EigenDecomposition {
            values: vec![a[(0, 0)].re],
            vectors: ComplexMatrix::identity(1, 1),
        });
    }
    let eig = nalgebra::SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::EigenConvergence {
            iterations: EIG_MAX_ITER,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Frobenius-nearest positive-semidefinite matrix.
pub fn project_psd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(eig_hermitian(a)?.reassemble(|l| l.max(0.0)))
}

/// `Tr[A† B]`.
pub fn trace_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "trace_inner of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Real part of `Tr[A B]` for Hermitian `A`, `B`.
pub fn trace_product_re(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    // Tr[AB] = Σ_ij A_ij B_ji = Σ_ij conj(A_ji) B_ji for Hermitian A.
    a.0.iter().zip(b.0.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(a: &HermitianMatrix) -> Result<f64> {
    Ok(eig_hermitian(a)?.values.iter().map(|l| l.abs()).sum())
}

/// `A^{-1/2}` for a positive-definite `A`.
pub fn inv_sqrt_pd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eig_hermitian(a)?;
    if eig.values[0] <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "inverse square root of a matrix with eigenvalue {:e}",
            eig.values[0]
        )));
    }
    Ok(eig.reassemble(|l| 1.0 / l.sqrt()))
}

/// `B A B` for Hermitian `A`, `B`, kept exactly Hermitian.
pub fn congruence(b: &HermitianMatrix, a: &HermitianMatrix) -> HermitianMatrix {
    let m = &b.0 * &a.0 * &b.0;
    HermitianMatrix(symmetrized(&m))
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Lowering operator `|g⟩⟨e|`.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
}

/// Raising operator `|e⟩⟨g|`.
pub fn sigma_plus() -> ComplexMatrix {
    sigma_minus().adjoint()
}

/// `|e⟩⟨e|`.
pub fn excited_projector() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)])
}

/// `|g⟩⟨g|`.
pub fn ground_projector() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)])
}

/// Places a single-site operator at `site` of an `n_sites` qubit register.
/// Site 0 is the leftmost Kronecker factor.
pub fn embed_site(op: &ComplexMatrix, site: usize, n_sites: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2, 2);
    let mut out = ComplexMatrix::identity(1, 1);
    for k in 0..n_sites {
        out = kron(&out, if k == site { op } else { &id });
    }
    out
}
