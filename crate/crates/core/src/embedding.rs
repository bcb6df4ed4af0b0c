//! Explicit state vectors from pairwise overlaps.
//!
//! Candidate `m` is written in an orthonormal basis built from the
//! candidates themselves: the first candidate is the first basis vector and
//! every later candidate contributes at most one new direction. Column `m`
//! of the coefficient matrix holds `C^{(m)}`, nonzero only in rows `n ≤ m`:
//!
//! ```text
//! C_n^(m) = (G[n][m] - Σ_{k<n} conj(C_k^(n)) C_k^(m)) / C_n^(n)    n < m
//! C_m^(m) = sqrt(1 - Σ_{k<m} |C_k^(m)|²)
//! ```
//!
//! A candidate whose radicand falls below `rank_tol` is linearly dependent
//! on its predecessors; its diagonal entry is zero and the missing basis
//! direction is skipped by all later columns. Round-off on ill-conditioned
//! input can push such a radicand slightly negative; only values below
//! `-max(rank_tol, GRAM_INPUT_TOL)` are reported as inconsistent.

use crate::error::{Error, Result};
use crate::linalg::{c, eig_hermitian, ComplexMatrix, ComplexVector, HermitianMatrix, C64};
use crate::two_sided::validate_priors;

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Precondition tolerance on the input Gram matrix.
pub const GRAM_INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EmbeddedEnsemble {
    /// Column `m` is the amplitude vector of candidate `m`.
    pub coeffs: ComplexMatrix,
    pub priors: Vec<f64>,
    /// Number of linearly independent candidates.
    pub rank: usize,
    /// Basis directions that carry weight, in order.
    active: Vec<usize>,
}

impl EmbeddedEnsemble {
    pub fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.ncols() == 0
    }

    /// Amplitudes of candidate `m` restricted to the active basis directions.
    pub fn compact_column(&self, m: usize) -> ComplexVector {
        ComplexVector::from_iterator(self.active.len(), self.active.iter().map(|&n| self.coeffs[(n, m)]))
    }
}

fn check_gram(gram: &ComplexMatrix) -> Result<()> {
    if !gram.is_square() {
        return Err(Error::InvalidGram(format!("shape {:?} is not square", gram.shape())));
    }
    let n = gram.nrows();
    for i in 0..n {
        if (gram[(i, i)] - c(1.0, 0.0)).norm() > GRAM_INPUT_TOL {
            return Err(Error::InvalidGram(format!("diagonal entry {i} is {}", gram[(i, i)])));
        }
        for j in 0..n {
            let z = gram[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidGram("non-finite entry".into()));
            }
            if (z - gram[(j, i)].conj()).norm() > GRAM_INPUT_TOL {
                return Err(Error::InvalidGram(format!("entries ({i},{j}) and ({j},{i}) are not conjugate")));
            }
        }
    }
    let herm = HermitianMatrix::from_hermitian_unchecked((gram + gram.adjoint()).map(|z| z * 0.5));
    let min = eig_hermitian(&herm)?.values.first().copied().unwrap_or(0.0);
    if min < -GRAM_INPUT_TOL {
        return Err(Error::InvalidGram(format!("eigenvalue {min:e} below PSD floor")));
    }
    Ok(())
}

/// Recursive triangular embedding of the candidates described by `gram`.
pub fn embed(gram: &ComplexMatrix, priors: &[f64], rank_tol: f64) -> Result<EmbeddedEnsemble> {
    check_gram(gram)?;
    let n = gram.nrows();
    validate_priors(priors, n)?;
    let zero = C64::new(0.0, 0.0);
    let mut coeffs = ComplexMatrix::zeros(n, n);
    let mut active = Vec::with_capacity(n);

    for m in 0..n {
        // exact duplicates reuse the earlier column bit for bit
        if let Some(j) = (0..m).find(|&j| (0..n).all(|k| gram[(k, m)] == gram[(k, j)])) {
            let col = coeffs.column(j).into_owned();
            coeffs.set_column(m, &col);
            continue;
        }
        for &row in &active {
            let mut acc = gram[(row, m)];
            for k in 0..row {
                acc -= coeffs[(k, row)].conj() * coeffs[(k, m)];
            }
            coeffs[(row, m)] = acc / coeffs[(row, row)];
        }
        let radicand = 1.0 - (0..m).map(|k| coeffs[(k, m)].norm_sqr()).sum::<f64>();
        if radicand < -rank_tol.max(GRAM_INPUT_TOL) {
            return Err(Error::InconsistentGram { column: m, radicand });
        }
        if radicand <= rank_tol {
            coeffs[(m, m)] = zero;
        } else {
            coeffs[(m, m)] = c(radicand.sqrt(), 0.0);
            active.push(m);
        }
    }

    Ok(EmbeddedEnsemble {
        coeffs,
        priors: priors.to_vec(),
        rank: active.len(),
        active,
    })
}

/// Pure-state density matrices on the `rank`-dimensional span of the
/// candidates.
pub fn densities(emb: &EmbeddedEnsemble) -> Vec<HermitianMatrix> {
    (0..emb.len())
        .map(|m| HermitianMatrix::projector(&emb.compact_column(m)))
        .collect()
}

/// `C† C`, the Gram matrix implied by the embedding.
pub fn reconstruct(emb: &EmbeddedEnsemble) -> ComplexMatrix {
    emb.coeffs.adjoint() * &emb.coeffs
}
