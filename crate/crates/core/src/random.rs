//! Seeded random states and Gram matrices for studies and property checks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, ComplexMatrix, ComplexVector, HermitianMatrix};

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-random unit vector.
pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> ComplexVector {
    let v = gaussian_matrix(rng, dim, 1).column(0).into_owned();
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Density matrix `A A† / Tr[A A†]` with `A` a `dim × rank` Ginibre matrix.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize, rank: usize) -> HermitianMatrix {
    let a = gaussian_matrix(rng, dim, rank.max(1));
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    let m = m / c(tr, 0.0);
    HermitianMatrix::new((&m + m.adjoint()) * c(0.5, 0.0)).expect("Ginibre product is Hermitian")
}

/// Gram matrix of `n` random unit vectors in a `rank`-dimensional space.
pub fn random_gram<R: Rng>(rng: &mut R, n: usize, rank: usize) -> ComplexMatrix {
    let vecs = ComplexMatrix::from_columns(&(0..n).map(|_| random_pure(rng, rank.max(1))).collect::<Vec<_>>());
    let mut g = vecs.adjoint() * vecs;
    for i in 0..n {
        g[(i, i)] = c(1.0, 0.0);
    }
    g
}
