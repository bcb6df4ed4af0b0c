//! Overlaps of full system–environment states from a two-sided master
//! equation.
//!
//! For hypotheses `n`, `m` the operator `ρ_nm` evolves as
//!
//! ```text
//! dρ_nm/dt = -i(H_n ρ_nm - ρ_nm H_m)
//!            + Σ_j [ c_jn ρ_nm c_jm† - ½(c_jn† c_jn ρ_nm + ρ_nm c_jm† c_jm) ]
//! ```
//!
//! starting from the shared initial state, and `⟨ψ_n|ψ_m⟩ = Tr ρ_mn(t)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, check_finite, eig_hermitian, ComplexMatrix, HermitianMatrix, C64};

/// Tolerance on the Gram-matrix invariants checked after integration.
pub const GRAM_TOL: f64 = 1e-8;

/// Candidate generators for `N` hypotheses sharing one initial state.
///
/// Jump operators are stored as a `J × N` grid: row `j` holds the operator
/// each hypothesis assigns to the same physical environment channel.
/// Hypotheses without a given channel carry a zero matrix in that slot.
#[derive(Debug, Clone)]
pub struct HypothesisEnsemble {
    dim: usize,
    hamiltonians: Vec<HermitianMatrix>,
    channels: Vec<Vec<ComplexMatrix>>,
    priors: Vec<f64>,
    initial_state: HermitianMatrix,
}

impl HypothesisEnsemble {
    pub fn new(
        hamiltonians: Vec<HermitianMatrix>,
        channels: Vec<Vec<ComplexMatrix>>,
        priors: Vec<f64>,
        initial_state: HermitianMatrix,
    ) -> Result<Self> {
        let n = hamiltonians.len();
        if n == 0 {
            return Err(Error::InvalidInput("ensemble needs at least one hypothesis".into()));
        }
        let dim = initial_state.dim();
        for (m, h) in hamiltonians.iter().enumerate() {
            if h.dim() != dim {
                return Err(Error::Dimension(format!(
                    "Hamiltonian {m} is {0}x{0}, initial state is {dim}x{dim}",
                    h.dim()
                )));
            }
        }
        for (j, row) in channels.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "channel row {j} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (m, op) in row.iter().enumerate() {
                if op.shape() != (dim, dim) {
                    return Err(Error::Dimension(format!(
                        "channel ({j}, {m}) has shape {:?}, expected {dim}x{dim}",
                        op.shape()
                    )));
                }
                check_finite(op, "jump operator")?;
            }
        }
        validate_priors(&priors, n)?;
        validate_density(&initial_state, 1e-10)?;
        Ok(HypothesisEnsemble {
            dim,
            hamiltonians,
            channels,
            priors,
            initial_state,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.hamiltonians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hamiltonians.is_empty()
    }

    pub fn hamiltonians(&self) -> &[HermitianMatrix] {
        &self.hamiltonians
    }

    pub fn channels(&self) -> &[Vec<ComplexMatrix>] {
        &self.channels
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn initial_state(&self) -> &HermitianMatrix {
        &self.initial_state
    }

    /// Same generators with different priors.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        validate_priors(&priors, self.len())?;
        Ok(HypothesisEnsemble {
            priors,
            ..self.clone()
        })
    }

    /// Same generators with a different initial state.
    pub fn with_initial_state(&self, initial_state: HermitianMatrix) -> Result<Self> {
        Self::new(
            self.hamiltonians.clone(),
            self.channels.clone(),
            self.priors.clone(),
            initial_state,
        )
    }

    /// Appends a channel row.
    pub fn with_channel_row(&self, row: Vec<ComplexMatrix>) -> Result<Self> {
        let mut channels = self.channels.clone();
        channels.push(row);
        Self::new(
            self.hamiltonians.clone(),
            channels,
            self.priors.clone(),
            self.initial_state.clone(),
        )
    }
}

pub(crate) fn validate_priors(priors: &[f64], n: usize) -> Result<()> {
    if priors.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} priors for {n} hypotheses",
            priors.len()
        )));
    }
    if priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidInput("priors must be finite and non-negative".into()));
    }
    let sum: f64 = priors.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("priors sum to {sum}, expected 1")));
    }
    Ok(())
}

pub(crate) fn validate_density(rho: &HermitianMatrix, tol: f64) -> Result<()> {
    let tr = rho.as_matrix().trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidInput(format!("density matrix has trace {tr}")));
    }
    let min = rho.min_eigenvalue()?;
    if min < -tol {
        return Err(Error::InvalidInput(format!(
            "density matrix is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Pairwise overlaps `G[n][m] = ⟨ψ_n|ψ_m⟩` sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct GramTrajectory {
    pub times: Vec<f64>,
    pub grams: Vec<ComplexMatrix>,
}

impl GramTrajectory {
    /// Index of the stored sample nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) if k >= self.times.len() => self.times.len() - 1,
            Err(k) => {
                if (t - self.times[k - 1]) <= (self.times[k] - t) {
                    k - 1
                } else {
                    k
                }
            }
        }
    }

    /// Checks Hermiticity, unit diagonal, modulus bound and PSD floor of every
    /// stored Gram matrix.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        for (t, g) in self.times.iter().zip(&self.grams) {
            let n = g.nrows();
            for i in 0..n {
                if (g[(i, i)] - c(1.0, 0.0)).norm() > tol {
                    return Err(Error::IntegrationAccuracy(format!(
                        "diagonal overlap {} at t = {t} deviates from 1",
                        g[(i, i)]
                    )));
                }
                for j in 0..n {
                    if (g[(i, j)] - g[(j, i)].conj()).norm() > tol {
                        return Err(Error::IntegrationAccuracy(format!(
                            "Gram matrix not Hermitian at t = {t}"
                        )));
                    }
                    if !g[(i, j)].re.is_finite() || g[(i, j)].norm() > 1.0 + tol {
                        return Err(Error::IntegrationAccuracy(format!(
                            "overlap |G[{i}][{j}]| = {} exceeds 1 at t = {t}",
                            g[(i, j)].norm()
                        )));
                    }
                }
            }
            let herm = HermitianMatrix::from_hermitian_unchecked(
                (g + g.adjoint()).map(|z| z * 0.5),
            );
            let min = eig_hermitian(&herm)?.values[0];
            if min < -tol {
                return Err(Error::IntegrationAccuracy(format!(
                    "Gram matrix has eigenvalue {min:e} at t = {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed generator for one ordered pair `(n, m)`:
/// `dρ/dt = K_n ρ + ρ K_m† + Σ_j c_jn ρ c_jm†` with
/// `K = -iH - ½ Σ_j c_j† c_j`.
struct PairGenerator {
    left: ComplexMatrix,
    right: ComplexMatrix,
    jumps: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl PairGenerator {
    fn new(ens: &HypothesisEnsemble, n: usize, m: usize) -> Self {
        let effective = |k: usize| {
            let mut out = ens.hamiltonians[k].as_matrix() * c(0.0, -1.0);
            for row in &ens.channels {
                let op = &row[k];
                out -= (op.adjoint() * op) * c(0.5, 0.0);
            }
            out
        };
        let left = effective(n);
        let right = effective(m).adjoint();
        let jumps = ens
            .channels
            .iter()
            .filter(|row| !is_zero(&row[n]) && !is_zero(&row[m]))
            .map(|row| (row[n].clone(), row[m].adjoint()))
            .collect();
        PairGenerator { left, right, jumps }
    }

    fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = &self.left * rho + rho * &self.right;
        for (a, b_dag) in &self.jumps {
            out += a * rho * b_dag;
        }
        out
    }
}

fn is_zero(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| *z == C64::new(0.0, 0.0))
}

fn check_pair(ens: &HypothesisEnsemble, n: usize, m: usize) -> Result<()> {
    if n >= ens.len() || m >= ens.len() {
        return Err(Error::InvalidInput(format!(
            "pair ({n}, {m}) out of range for {} hypotheses",
            ens.len()
        )));
    }
    Ok(())
}

/// Right-hand side of the two-sided master equation for the block `ρ_nm`.
pub fn pair_rhs(
    rho_nm: &ComplexMatrix,
    n: usize,
    m: usize,
    ens: &HypothesisEnsemble,
) -> Result<ComplexMatrix> {
    check_pair(ens, n, m)?;
    if rho_nm.shape() != (ens.dim, ens.dim) {
        return Err(Error::Dimension(format!(
            "rho_nm has shape {:?}, expected {d}x{d}",
            rho_nm.shape(),
            d = ens.dim
        )));
    }
    Ok(PairGenerator::new(ens, n, m).apply(rho_nm))
}

/// Integrates `ρ_nm` with classic RK4, handing every stored sample
/// (including `t = 0`) to `observe`.
pub fn propagate_pair(
    ens: &HypothesisEnsemble,
    n: usize,
    m: usize,
    t_final: f64,
    n_steps: usize,
    mut observe: impl FnMut(usize, &ComplexMatrix),
) -> Result<()> {
    check_pair(ens, n, m)?;
    check_grid(t_final, n_steps)?;
    let gen = PairGenerator::new(ens, n, m);
    let h = t_final / n_steps as f64;
    let half = c(0.5 * h, 0.0);
    let full = c(h, 0.0);
    let sixth = c(h / 6.0, 0.0);
    let two = c(2.0, 0.0);
    let mut rho = ens.initial_state.as_matrix().clone();
    observe(0, &rho);
    for step in 1..=n_steps {
        let k1 = gen.apply(&rho);
        let k2 = gen.apply(&(&rho + &k1 * half));
        let k3 = gen.apply(&(&rho + &k2 * half));
        let k4 = gen.apply(&(&rho + &k3 * full));
        rho += (k1 + k2 * two + k3 * two + k4) * sixth;
        observe(step, &rho);
    }
    Ok(())
}

fn check_grid(t_final: f64, n_steps: usize) -> Result<()> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidInput(format!("t_final must be positive, got {t_final}")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    Ok(())
}

/// Integrates every pair `n ≤ m` in parallel and assembles the Gram
/// trajectory without checking its invariants.
pub fn integrate_gram_raw(
    ens: &HypothesisEnsemble,
    t_final: f64,
    n_steps: usize,
) -> Result<GramTrajectory> {
    check_grid(t_final, n_steps)?;
    let n = ens.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let traces: Vec<Vec<C64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut tr = vec![C64::new(0.0, 0.0); n_steps + 1];
            propagate_pair(ens, a, b, t_final, n_steps, |k, rho| tr[k] = rho.trace())?;
            Ok(tr)
        })
        .collect::<Result<_>>()?;

    let h = t_final / n_steps as f64;
    let times = (0..=n_steps).map(|k| k as f64 * h).collect();
    let mut grams = vec![ComplexMatrix::zeros(n, n); n_steps + 1];
    for (&(a, b), tr) in pairs.iter().zip(&traces) {
        for (g, &z) in grams.iter_mut().zip(tr) {
            // ⟨ψ_a|ψ_b⟩ = Tr ρ_ba = conj(Tr ρ_ab)
            g[(a, b)] = z.conj();
            g[(b, a)] = z;
        }
    }
    Ok(GramTrajectory { times, grams })
}

/// Gram trajectory on `n_steps + 1` uniformly spaced times in `[0, t_final]`.
///
/// Fails with [`Error::IntegrationAccuracy`] when any stored Gram matrix
/// breaks its invariants by more than [`GRAM_TOL`].
pub fn integrate_gram(
    ens: &HypothesisEnsemble,
    t_final: f64,
    n_steps: usize,
) -> Result<GramTrajectory> {
    let traj = integrate_gram_raw(ens, t_final, n_steps)?;
    traj.check_invariants(GRAM_TOL)?;
    Ok(traj)
}

/// Largest entrywise change of the Gram trajectory when the step count is
/// doubled. Values at or below `1e-7` indicate convergence.
pub fn convergence_check(ens: &HypothesisEnsemble, t_final: f64, n_steps: usize) -> Result<f64> {
    let coarse = integrate_gram_raw(ens, t_final, n_steps)?;
    let fine = integrate_gram_raw(ens, t_final, 2 * n_steps)?;
    let mut worst: f64 = 0.0;
    for (k, g) in coarse.grams.iter().enumerate() {
        let diff = (g - &fine.grams[2 * k]).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        worst = if diff.is_nan() { f64::INFINITY } else { worst.max(diff) };
    }
    Ok(worst)
}
