//! Minimum-error discrimination of mixed states.
//!
//! The optimal POVM maximizes `Σ_m P_m Tr[E_m ρ_m]` over `E_m ⪰ 0`,
//! `Σ_m E_m = I`. Its dual is
//!
//! ```text
//! minimize Tr Y   subject to   Y ⪰ P_m ρ_m  for all m
//! ```
//!
//! and strong duality holds. The solver follows the central path of the
//! log-barrier `t·Tr Y − Σ_m log det(Y − P_m ρ_m)` with damped Newton steps.
//! On the path `Σ_m (Y − P_m ρ_m)^{-1} = t·I`, so `E_m = (Y − P_m ρ_m)^{-1}/t`
//! is a primal point; it is renormalized to sum exactly to the identity and
//! the duality gap `Tr Y − Σ_m P_m Tr[E_m ρ_m]` is measured on the pair
//! `(E, Y)`. Both iterates are strictly feasible at all times.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    c, congruence, eig_hermitian, inv_sqrt_pd, trace_norm, trace_product_re, ComplexMatrix,
    ComplexVector, HermitianMatrix, C64,
};
use crate::two_sided::{validate_density, validate_priors};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Traces below this value mark a hypothesis as ruled out.
pub const RULED_OUT_TRACE: f64 = 1e-4;

const STATE_TOL: f64 = 1e-9;
const BARRIER_GROWTH: f64 = 10.0;
const CENTERING_TOL: f64 = 1e-8;
const MAX_BARRIER_WEIGHT: f64 = 1e16;

/// Candidate density matrices with prior probabilities.
#[derive(Debug, Clone)]
pub struct StateEnsemble {
    states: Vec<HermitianMatrix>,
    priors: Vec<f64>,
}

impl StateEnsemble {
    pub fn new(states: Vec<HermitianMatrix>, priors: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one state".into()));
        }
        let dim = states[0].dim();
        for (m, rho) in states.iter().enumerate() {
            if rho.dim() != dim {
                return Err(Error::Dimension(format!(
                    "state {m} has dimension {}, expected {dim}",
                    rho.dim()
                )));
            }
            validate_density(rho, STATE_TOL)
                .map_err(|e| Error::InvalidInput(format!("state {m}: {e}")))?;
        }
        validate_priors(&priors, states.len())?;
        Ok(StateEnsemble { states, priors })
    }

    /// Ensemble of pure states; each vector is normalized.
    pub fn pure(vectors: &[ComplexVector], priors: Vec<f64>) -> Result<Self> {
        let states = vectors
            .iter()
            .map(|v| {
                let norm = v.norm();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::InvalidInput("state vector has zero norm".into()));
                }
                Ok(HermitianMatrix::projector(&(v / c(norm, 0.0))))
            })
            .collect::<Result<_>>()?;
        Self::new(states, priors)
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[HermitianMatrix] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    fn weighted(&self) -> Vec<HermitianMatrix> {
        self.states.iter().zip(&self.priors).map(|(r, &p)| r.scale(p)).collect()
    }
}

/// Effects `E_m ⪰ 0` with `Σ_m E_m = I`, one per hypothesis.
#[derive(Debug, Clone)]
pub struct Povm {
    pub effects: Vec<HermitianMatrix>,
}

#[derive(Debug, Clone)]
pub struct DiscriminationResult {
    pub q_error: f64,
    pub povm: Povm,
    /// Dual variable `Y` with `Y ⪰ P_m ρ_m`; `1 − Tr Y` bounds the error from below.
    pub dual_certificate: HermitianMatrix,
    pub duality_gap: f64,
    /// Newton steps taken.
    pub iterations: usize,
}

impl DiscriminationResult {
    /// Lower bound on the optimal error certified by the dual variable.
    pub fn dual_bound(&self) -> f64 {
        1.0 - self.dual_certificate.trace_re()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Two-state minimum error `½(1 − ‖p1 ρ1 − p2 ρ2‖₁)`.
pub fn helstrom(rho1: &HermitianMatrix, rho2: &HermitianMatrix, p1: f64, p2: f64) -> Result<f64> {
    validate_priors(&[p1, p2], 2)?;
    if rho1.dim() != rho2.dim() {
        return Err(Error::Dimension("helstrom states differ in dimension".into()));
    }
    validate_density(rho1, STATE_TOL)?;
    validate_density(rho2, STATE_TOL)?;
    let diff = rho1.scale(p1).sub(&rho2.scale(p2));
    Ok(0.5 * (1.0 - trace_norm(&diff)?))
}

/// Orthonormal basis of the Hermitian matrices under `Tr[A B]`, each element
/// stored as its nonzero `(row, col, value)` entries.
fn hermitian_basis(d: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        basis.push(vec![(i, i, c(1.0, 0.0))]);
    }
    for i in 0..d {
        for j in i + 1..d {
            basis.push(vec![(i, j, c(r, 0.0)), (j, i, c(r, 0.0))]);
            basis.push(vec![(i, j, c(0.0, r)), (j, i, c(0.0, -r))]);
        }
    }
    basis
}

struct Barrier {
    dim: usize,
    basis: Vec<Vec<(usize, usize, C64)>>,
    weighted: Vec<HermitianMatrix>,
}

impl Barrier {
    /// `Tr[B_a X]` for every basis element.
    fn coords(&self, x: &ComplexMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.basis.len(),
            self.basis
                .iter()
                .map(|b| b.iter().map(|&(k, l, beta)| (beta * x[(l, k)]).re).sum()),
        )
    }

    fn matrix(&self, coords: &DVector<f64>) -> HermitianMatrix {
        let mut x = ComplexMatrix::zeros(self.dim, self.dim);
        for (b, &w) in self.basis.iter().zip(coords.iter()) {
            for &(k, l, beta) in b {
                x[(k, l)] += beta * w;
            }
        }
        HermitianMatrix::from_hermitian_unchecked(x)
    }

    /// Inverses of the slacks `Y − P_m ρ_m`, or `None` if any slack is not
    /// positive definite.
    fn slack_inverses(&self, y: &HermitianMatrix) -> Option<Vec<HermitianMatrix>> {
        self.weighted
            .iter()
            .map(|s| {
                let z = y.as_matrix() - s.as_matrix();
                let inv = Cholesky::new(z)?.inverse();
                Some(HermitianMatrix::from_hermitian_unchecked(
                    (&inv + inv.adjoint()).map(|v| v * 0.5),
                ))
            })
            .collect()
    }

    /// Hessian `X ↦ Σ_m W_m X W_m` in basis coordinates, using
    /// `Tr[E_kl W E_pq W] = W_lp W_qk`.
    fn hessian(&self, inverses: &[HermitianMatrix]) -> DMatrix<f64> {
        let nb = self.basis.len();
        let mut h = DMatrix::<f64>::zeros(nb, nb);
        for w in inverses {
            for a in 0..nb {
                for b in a..nb {
                    let mut acc = C64::new(0.0, 0.0);
                    for &(k, l, ba) in &self.basis[a] {
                        for &(p, q, bb) in &self.basis[b] {
                            acc += ba * bb * w[(l, p)] * w[(q, k)];
                        }
                    }
                    h[(a, b)] += acc.re;
                }
            }
        }
        for a in 0..nb {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }

    fn is_feasible(&self, y: &HermitianMatrix) -> bool {
        self.weighted
            .iter()
            .all(|s| Cholesky::new(y.as_matrix() - s.as_matrix()).is_some())
    }

    /// Primal point from the current slacks, scaled so the effects sum to
    /// the identity exactly.
    fn primal(
        &self,
        y: &HermitianMatrix,
        inverses: &[HermitianMatrix],
        weight: f64,
        iterations: usize,
    ) -> Result<DiscriminationResult> {
        let raw: Vec<HermitianMatrix> = inverses.iter().map(|w| w.scale(1.0 / weight)).collect();
        let total = raw
            .iter()
            .skip(1)
            .fold(raw[0].clone(), |acc, e| acc.add(e));
        let norm = inv_sqrt_pd(&total)?;
        let effects: Vec<HermitianMatrix> = raw.iter().map(|e| congruence(&norm, e)).collect();
        let success: f64 = effects
            .iter()
            .zip(&self.weighted)
            .map(|(e, s)| trace_product_re(e, s))
            .sum();
        // Tr Y − Σ Tr[E_m P_m ρ_m] = Σ Tr[E_m (Y − P_m ρ_m)] once Σ E_m = I
        let gap: f64 = effects
            .iter()
            .zip(&self.weighted)
            .map(|(e, s)| trace_product_re(e, &y.sub(s)))
            .sum();
        Ok(DiscriminationResult {
            q_error: (1.0 - success).clamp(0.0, 1.0),
            povm: Povm { effects },
            dual_certificate: y.clone(),
            duality_gap: gap.max(0.0),
            iterations,
        })
    }
}

/// Hypotheses that can carry a nonzero effect in some optimum: positive
/// prior and, among exact duplicates, the largest prior (first on ties).
/// The others are assigned a zero effect; guessing them never beats
/// guessing their retained duplicate.
fn retained_hypotheses(ens: &StateEnsemble) -> Vec<usize> {
    let n = ens.len();
    (0..n)
        .filter(|&m| {
            let p = ens.priors[m];
            p > 0.0
                && !(0..n).any(|k| {
                    k != m
                        && ens.states[k] == ens.states[m]
                        && (ens.priors[k] > p || (ens.priors[k] == p && k < m))
                })
        })
        .collect()
}

/// Optimal minimum-error POVM with a dual certificate whose duality gap is
/// at most `opts.tol`.
///
/// Hypotheses with zero prior, and exact duplicates of a state with a
/// larger prior, receive zero effects.
pub fn solve_min_error(ens: &StateEnsemble, opts: SolverOptions) -> Result<DiscriminationResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let keep = retained_hypotheses(ens);
    let d = ens.dim();
    let expand = |reduced: DiscriminationResult| {
        let mut effects = vec![HermitianMatrix::zeros(d); ens.len()];
        for (e, &m) in reduced.povm.effects.into_iter().zip(&keep) {
            effects[m] = e;
        }
        DiscriminationResult {
            povm: Povm { effects },
            ..reduced
        }
    };
    if keep.len() == 1 {
        let m = keep[0];
        let p = ens.priors[m];
        return Ok(expand(DiscriminationResult {
            q_error: 1.0 - p,
            povm: Povm {
                effects: vec![HermitianMatrix::identity(d)],
            },
            dual_certificate: ens.states[m].scale(p),
            duality_gap: 0.0,
            iterations: 0,
        }));
    }
    if keep.len() == ens.len() {
        return solve_reduced(ens, opts);
    }
    let reduced = StateEnsemble {
        states: keep.iter().map(|&m| ens.states[m].clone()).collect(),
        priors: keep.iter().map(|&m| ens.priors[m]).collect(),
    };
    match solve_reduced(&reduced, opts) {
        Ok(res) => Ok(expand(res)),
        Err(Error::NonConvergence { iterations, gap, best }) => Err(Error::NonConvergence {
            iterations,
            gap,
            best: best.map(|b| Box::new(expand(*b))),
        }),
        Err(e) => Err(e),
    }
}

/// Barrier path-following on an ensemble whose priors are all positive.
fn solve_reduced(ens: &StateEnsemble, opts: SolverOptions) -> Result<DiscriminationResult> {
    let d = ens.dim();
    let n = ens.len();
    let barrier = Barrier {
        dim: d,
        basis: hermitian_basis(d),
        weighted: ens.weighted(),
    };

    let top = barrier
        .weighted
        .iter()
        .map(|s| eig_hermitian(s).map(|e| *e.values.last().unwrap()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut y = HermitianMatrix::identity(d).scale(top + 1.0);
    let mut weight = (n * d) as f64;
    let mut iterations = 0;
    let mut best: Option<DiscriminationResult> = None;

    let fail = |iterations: usize, best: Option<DiscriminationResult>| Error::NonConvergence {
        iterations,
        gap: best.as_ref().map_or(f64::INFINITY, |b| b.duality_gap),
        best: best.map(Box::new),
    };

    loop {
        // centering
        let inverses = loop {
            let inverses = barrier
                .slack_inverses(&y)
                .ok_or_else(|| Error::InvalidInput("dual iterate left the feasible region".into()))?;
            let mut grad = HermitianMatrix::identity(d).scale(weight);
            for w in &inverses {
                grad = grad.sub(w);
            }
            let g = barrier.coords(grad.as_matrix());
            let h = barrier.hessian(&inverses);
            let step = match Cholesky::new(h.clone()) {
                Some(ch) => Some(ch.solve(&(-&g))),
                None => h.lu().solve(&(-&g)),
            };
            let Some(step) = step else { break inverses };
            let decrement = -g.dot(&step);
            if !decrement.is_finite() || decrement <= CENTERING_TOL * (1.0 + weight * 1e-16) {
                break inverses;
            }
            let lambda = decrement.max(0.0).sqrt();
            let mut alpha = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
            let delta = barrier.matrix(&step);
            let mut next = y.add(&delta.scale(alpha));
            let mut halvings = 0;
            while !barrier.is_feasible(&next) && halvings < 60 {
                alpha *= 0.5;
                next = y.add(&delta.scale(alpha));
                halvings += 1;
            }
            if halvings == 60 {
                break inverses;
            }
            y = next;
            iterations += 1;
            if iterations >= opts.max_iter {
                let inverses = barrier.slack_inverses(&y).unwrap_or(inverses);
                let candidate = barrier.primal(&y, &inverses, weight, iterations)?;
                best = keep_best(best, candidate);
                return Err(fail(iterations, best));
            }
        };

        let candidate = barrier.primal(&y, &inverses, weight, iterations)?;
        if candidate.duality_gap <= opts.tol {
            return Ok(candidate);
        }
        best = keep_best(best, candidate);
        weight *= BARRIER_GROWTH;
        if weight > MAX_BARRIER_WEIGHT {
            return Err(fail(iterations, best));
        }
    }
}

fn keep_best(
    best: Option<DiscriminationResult>,
    candidate: DiscriminationResult,
) -> Option<DiscriminationResult> {
    match best {
        Some(b) if b.duality_gap <= candidate.duality_gap => Some(b),
        _ => Some(candidate),
    }
}

/// `Tr E_m` for every effect. Small values are reported as they are.
pub fn effect_traces(result: &DiscriminationResult) -> Vec<f64> {
    result.povm.effects.iter().map(|e| e.trace_re()).collect()
}

/// Checks Hermiticity of `Y`, dual feasibility `Y − P_m ρ_m ⪰ −tol`, and a
/// duality gap (recomputed from `ens`) of at most `tol`.
pub fn verify_certificate(result: &DiscriminationResult, ens: &StateEnsemble, tol: f64) -> bool {
    let y = result.dual_certificate.as_matrix();
    if y.nrows() != ens.dim() || result.povm.effects.len() != ens.len() {
        return false;
    }
    let hermitian = (y - y.adjoint()).iter().all(|z| z.norm() <= tol);
    if !hermitian {
        return false;
    }
    let y = &result.dual_certificate;
    for (rho, &p) in ens.states.iter().zip(&ens.priors) {
        match y.sub(&rho.scale(p)).min_eigenvalue() {
            Ok(min) if min >= -tol => {}
            _ => return false,
        }
    }
    let success: f64 = result
        .povm
        .effects
        .iter()
        .zip(ens.states.iter().zip(&ens.priors))
        .map(|(e, (rho, &p))| p * trace_product_re(e, rho))
        .sum();
    let gap = y.trace_re() - success;
    gap <= tol && gap >= -tol
}

/// Smallest eigenvalue of `Y − P_m ρ_m` over all `m`.
pub fn dual_feasibility_floor(result: &DiscriminationResult, ens: &StateEnsemble) -> Result<f64> {
    let mut floor = f64::INFINITY;
    for (rho, &p) in ens.states.iter().zip(&ens.priors) {
        floor = floor.min(result.dual_certificate.sub(&rho.scale(p)).min_eigenvalue()?);
    }
    Ok(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexVector;
    use approx::assert_abs_diff_eq;

    fn ket(a: C64, b: C64) -> ComplexVector {
        ComplexVector::from_vec(vec![a, b])
    }

    fn planar(theta: f64) -> ComplexVector {
        ket(c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0))
    }

    fn trine() -> StateEnsemble {
        let states: Vec<_> = (0..3).map(|m| planar(2.0 * std::f64::consts::PI * m as f64 / 3.0)).collect();
        StateEnsemble::pure(&states, vec![1.0 / 3.0; 3]).unwrap()
    }

    #[test]
    fn helstrom_examples() {
        let zero = HermitianMatrix::projector(&planar(0.0));
        let one = HermitianMatrix::projector(&planar(std::f64::consts::PI));
        assert_abs_diff_eq!(helstrom(&zero, &one, 0.5, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(helstrom(&zero, &zero, 0.5, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        let half = HermitianMatrix::projector(&planar(std::f64::consts::FRAC_PI_2));
        let want = 0.5 * (1.0 - 0.5f64.sqrt());
        assert_abs_diff_eq!(helstrom(&zero, &half, 0.5, 0.5).unwrap(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(want, 0.146447, epsilon = 1e-6);
        assert!(helstrom(&zero, &half, 0.5, 0.6).is_err());
    }

    #[test]
    fn trine_hand_certificate() {
        // Y = I/3 satisfies Y − ρ_m/3 = (I − ρ_m)/3 ⪰ 0 with Tr Y = 2/3.
        let ens = trine();
        let y = HermitianMatrix::identity(2).scale(1.0 / 3.0);
        let effects = ens.states().iter().map(|r| r.scale(2.0 / 3.0)).collect();
        let hand = DiscriminationResult {
            q_error: 1.0 / 3.0,
            povm: Povm { effects },
            dual_certificate: y,
            duality_gap: 0.0,
            iterations: 0,
        };
        assert!(verify_certificate(&hand, &ens, 1e-12));
    }

    #[test]
    fn trine_optimum() {
        let ens = trine();
        let res = solve_min_error(&ens, SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(res.q_error, 1.0 / 3.0, epsilon = 1e-6);
        for t in effect_traces(&res) {
            assert_abs_diff_eq!(t, 2.0 / 3.0, epsilon = 1e-5);
        }
        assert!(verify_certificate(&res, &ens, 1e-7));
        let perturbed = DiscriminationResult {
            dual_certificate: res.dual_certificate.sub(&HermitianMatrix::identity(2).scale(2e-7)),
            ..res.clone()
        };
        assert!(!verify_certificate(&perturbed, &ens, 1e-7));
    }

    #[test]
    fn orthogonal_basis_is_perfectly_distinguishable() {
        let vecs: Vec<ComplexVector> = (0..4)
            .map(|k| ComplexVector::from_fn(4, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) }))
            .collect();
        let ens = StateEnsemble::pure(&vecs, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let res = solve_min_error(&ens, SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(res.q_error, 0.0, epsilon = 1e-8);
        assert!(verify_certificate(&res, &ens, 1e-7));
    }

    #[test]
    fn projective_qubit_traces() {
        let ens = StateEnsemble::pure(&[planar(0.0), planar(std::f64::consts::PI)], vec![0.5, 0.5]).unwrap();
        let res = solve_min_error(&ens, SolverOptions::default()).unwrap();
        for t in effect_traces(&res) {
            assert_abs_diff_eq!(t, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn semicircle_rules_out_one_hypothesis() {
        let ens = StateEnsemble::pure(
            &[planar(0.0), planar(2.0 * std::f64::consts::PI / 3.0), planar(0.5)],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        let res = solve_min_error(&ens, SolverOptions::default()).unwrap();
        assert!(effect_traces(&res).iter().any(|&t| t < RULED_OUT_TRACE));
    }

    #[test]
    fn coincident_states_give_guessing_error() {
        let ens = StateEnsemble::pure(&[planar(0.4), planar(0.4), planar(0.4)], vec![0.2, 0.5, 0.3]).unwrap();
        let res = solve_min_error(&ens, SolverOptions::default()).unwrap();
        assert_eq!(res.q_error, 0.5);
        assert!(verify_certificate(&res, &ens, 1e-12));
    }

    #[test]
    fn zero_prior_and_duplicate_states_converge() {
        let ens = StateEnsemble::pure(
            &[planar(0.0), planar(1.0), planar(1.0)],
            vec![0.0, 0.6, 0.4],
        )
        .unwrap();
        let res = solve_min_error(&ens, SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(res.q_error, 0.4, epsilon = 1e-7);
        assert!(verify_certificate(&res, &ens, 1e-7));
    }

    #[test]
    fn rejects_bad_input() {
        let rho = HermitianMatrix::from_real_diagonal(&[0.5, 0.6]);
        assert!(StateEnsemble::new(vec![rho], vec![1.0]).is_err());
        let ens = trine();
        assert!(solve_min_error(&ens, SolverOptions { tol: 0.0, max_iter: 10 }).is_err());
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let ens = trine();
        match solve_min_error(&ens, SolverOptions { tol: 1e-12, max_iter: 3 }) {
            Err(Error::NonConvergence { iterations, gap, best }) => {
                assert_eq!(iterations, 3);
                assert!(gap.is_finite());
                assert!(best.is_some());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
