//! Studies built on the integrate → embed → solve pipeline.
//!
//! Every parallel loop collects results in input order, so outputs do not
//! depend on the number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{densities, embed, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{trace_norm, HermitianMatrix};
use crate::scenarios::{planar_qubit_state, random_qubit_triple};
use crate::sdp::{effect_traces, solve_min_error, SolverOptions, StateEnsemble, RULED_OUT_TRACE};
use crate::two_sided::{integrate_gram, GramTrajectory, HypothesisEnsemble};

/// Optimal error at sampled times, with its running minimum.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub q_error: Vec<f64>,
    /// `q_best[k] = min_{j ≤ k} q_error[j]`.
    pub q_best: Vec<f64>,
    pub traces: Vec<Vec<f64>>,
    pub ranks: Vec<usize>,
    pub max_gap: f64,
    pub max_iterations: usize,
}

/// Running minimum of `values`.
pub fn running_min(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// `n` uniformly spaced points in `[0, t_final]`; a single point sits at 0.
pub fn sample_times(t_final: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| t_final * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Solution of the discrimination problem posed by one Gram matrix.
pub struct GramSolve {
    pub q_error: f64,
    pub traces: Vec<f64>,
    pub rank: usize,
    pub gap: f64,
    pub iterations: usize,
    pub ensemble: StateEnsemble,
    pub result: crate::sdp::DiscriminationResult,
}

pub fn solve_gram(
    gram: &crate::linalg::ComplexMatrix,
    priors: &[f64],
    opts: SolverOptions,
) -> Result<GramSolve> {
    let emb = embed(gram, priors, DEFAULT_RANK_TOL)?;
    let ensemble = StateEnsemble::new(densities(&emb), priors.to_vec())?;
    let result = solve_min_error(&ensemble, opts)?;
    Ok(GramSolve {
        q_error: result.q_error,
        traces: effect_traces(&result),
        rank: emb.rank,
        gap: result.duality_gap,
        iterations: result.iterations,
        ensemble,
        result,
    })
}

/// Error curve from an already integrated Gram trajectory.
pub fn error_curve_from_trajectory(
    traj: &GramTrajectory,
    priors: &[f64],
    t_final: f64,
    n_times: usize,
    opts: SolverOptions,
) -> Result<ErrorCurve> {
    let times = sample_times(t_final, n_times);
    let solves: Vec<GramSolve> = times
        .par_iter()
        .map(|&t| {
            let g = &traj.grams[traj.nearest_index(t)];
            solve_gram(g, priors, opts).map_err(|e| Error::AtTime {
                time: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let q_error: Vec<f64> = solves.iter().map(|s| s.q_error).collect();
    Ok(ErrorCurve {
        q_best: running_min(&q_error),
        q_error,
        traces: solves.iter().map(|s| s.traces.clone()).collect(),
        ranks: solves.iter().map(|s| s.rank).collect(),
        max_gap: solves.iter().map(|s| s.gap).fold(0.0, f64::max),
        max_iterations: solves.iter().map(|s| s.iterations).max().unwrap_or(0),
        times,
    })
}

/// Minimum error probability of the hypothesis test as a function of the
/// measurement time.
pub fn error_curve(
    ens: &HypothesisEnsemble,
    t_final: f64,
    n_times: usize,
    n_steps: usize,
    opts: SolverOptions,
) -> Result<ErrorCurve> {
    let traj = integrate_gram(ens, t_final, n_steps)?;
    error_curve_from_trajectory(&traj, ens.priors(), t_final, n_times, opts)
}

/// Best error when only one pair of hypotheses is discriminated and the
/// third is never guessed: `1 − (P_i + P_j + ‖P_i ρ_i − P_j ρ_j‖₁)/2`,
/// minimized over pairs.
pub fn best_pair_error(states: &[HermitianMatrix], priors: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let diff = states[i].scale(priors[i]).sub(&states[j].scale(priors[j]));
            let q = 1.0 - 0.5 * (priors[i] + priors[j] + trace_norm(&diff)?);
            best = best.min(q);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct SimplexPoint {
    pub priors: [f64; 3],
    pub q_error: f64,
    pub traces: Vec<f64>,
    pub all_active: bool,
    pub pair_error: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexScan {
    pub points: Vec<SimplexPoint>,
}

impl SimplexScan {
    /// Fraction of grid points where every effect carries weight.
    pub fn active_fraction(&self) -> f64 {
        let n = self.points.iter().filter(|p| p.all_active).count();
        n as f64 / self.points.len() as f64
    }

    /// Largest `pair_error − q_error` over the all-active region.
    pub fn max_improvement(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.all_active)
            .map(|p| p.pair_error - p.q_error)
            .fold(0.0, f64::max)
    }

    pub fn max_gap(&self) -> f64 {
        self.points.iter().map(|p| p.duality_gap).fold(0.0, f64::max)
    }

    pub fn max_iterations(&self) -> usize {
        self.points.iter().map(|p| p.iterations).max().unwrap_or(0)
    }
}

/// Barycentric grid with `resolution` points per edge:
/// `(i, j, R−1−i−j)/(R−1)` for `i + j ≤ R−1`.
pub fn simplex_grid(resolution: usize) -> Result<Vec<[f64; 3]>> {
    if resolution < 2 {
        return Err(Error::InvalidInput("simplex resolution must be at least 2".into()));
    }
    let r = resolution - 1;
    let scale = r as f64;
    let mut out = Vec::with_capacity(resolution * (resolution + 1) / 2);
    for i in 0..=r {
        for j in 0..=(r - i) {
            let k = r - i - j;
            out.push([i as f64 / scale, j as f64 / scale, k as f64 / scale]);
        }
    }
    Ok(out)
}

fn check_three(states: &[HermitianMatrix]) -> Result<()> {
    if states.len() != 3 {
        return Err(Error::InvalidInput(format!("expected three states, got {}", states.len())));
    }
    Ok(())
}

/// Solves the three-state problem on every point of the prior simplex.
pub fn simplex_scan(
    states: &[HermitianMatrix],
    resolution: usize,
    opts: SolverOptions,
) -> Result<SimplexScan> {
    check_three(states)?;
    let grid = simplex_grid(resolution)?;
    let points = grid
        .par_iter()
        .map(|p| {
            let ens = StateEnsemble::new(states.to_vec(), p.to_vec())?;
            let res = solve_min_error(&ens, opts)?;
            let traces = effect_traces(&res);
            Ok(SimplexPoint {
                priors: *p,
                q_error: res.q_error,
                all_active: traces.iter().all(|&t| t >= RULED_OUT_TRACE),
                traces,
                pair_error: best_pair_error(states, p)?,
                duality_gap: res.duality_gap,
                iterations: res.iterations,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SimplexScan { points })
}

#[derive(Debug, Clone)]
pub struct AnglePoint {
    pub theta3: f64,
    pub q_error: f64,
    pub traces: Vec<f64>,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Three planar qubit states with equal priors, the third one swept.
pub fn angle_scan(
    theta3_grid: &[f64],
    theta1: f64,
    theta2: f64,
    opts: SolverOptions,
) -> Result<Vec<AnglePoint>> {
    theta3_grid
        .par_iter()
        .map(|&theta3| {
            let vecs = [theta1, theta2, theta3].map(planar_qubit_state);
            let ens = StateEnsemble::pure(&vecs, vec![1.0 / 3.0; 3])?;
            let res = solve_min_error(&ens, opts)?;
            Ok(AnglePoint {
                theta3,
                q_error: res.q_error,
                traces: effect_traces(&res),
                duality_gap: res.duality_gap,
                iterations: res.iterations,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SamplingStudy {
    pub grid: Vec<[f64; 3]>,
    /// Per grid point, the fraction of sampled triples with all effects
    /// active.
    pub active_fraction: Vec<f64>,
    /// Per sample, the all-active fraction of its simplex.
    pub area_fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub max_gap: f64,
    pub max_iterations: usize,
}

impl SamplingStudy {
    /// Counts of `area_fractions` in `bins` equal-width bins on `[0, 1]`.
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        let mut counts = vec![0; bins];
        for &a in &self.area_fractions {
            let k = ((a * bins as f64) as usize).min(bins - 1);
            counts[k] += 1;
        }
        counts
    }
}

/// Sub-seed for every sample, drawn from a generator seeded by `seed`.
pub fn derive_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Simplex scans of `n_samples` Haar-random pure qubit triples.
pub fn random_sampling_study(
    n_samples: usize,
    resolution: usize,
    seed: u64,
    opts: SolverOptions,
) -> Result<SamplingStudy> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let grid = simplex_grid(resolution)?;
    let seeds = derive_seeds(seed, n_samples);
    let scans: Vec<SimplexScan> = seeds
        .par_iter()
        .map(|&s| {
            let states: Vec<HermitianMatrix> =
                random_qubit_triple(s).iter().map(HermitianMatrix::projector).collect();
            simplex_scan(&states, resolution, opts)
        })
        .collect::<Result<_>>()?;
    let mut active = vec![0usize; grid.len()];
    for scan in &scans {
        for (count, p) in active.iter_mut().zip(&scan.points) {
            *count += p.all_active as usize;
        }
    }
    Ok(SamplingStudy {
        active_fraction: active.iter().map(|&c| c as f64 / n_samples as f64).collect(),
        area_fractions: scans.iter().map(SimplexScan::active_fraction).collect(),
        max_gap: scans.iter().map(SimplexScan::max_gap).fold(0.0, f64::max),
        max_iterations: scans.iter().map(SimplexScan::max_iterations).max().unwrap_or(0),
        grid,
        seeds,
    })
}

/// Error surface over a one-parameter family of ensembles.
#[derive(Debug, Clone)]
pub struct SweepSurface {
    pub parameters: Vec<f64>,
    pub times: Vec<f64>,
    /// `q_error[p][t]`; rows of failed points are NaN.
    pub q_error: Vec<Vec<f64>>,
    /// Parameter minimizing the error at each time (NaN if every point failed).
    pub argmin_parameter: Vec<f64>,
    pub failures: Vec<(f64, String)>,
    pub max_gap: f64,
    pub max_iterations: usize,
}

pub fn parameter_sweep<F>(
    builder: F,
    grid: &[f64],
    t_final: f64,
    n_times: usize,
    n_steps: usize,
    opts: SolverOptions,
) -> Result<SweepSurface>
where
    F: Fn(f64) -> Result<HypothesisEnsemble> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    let times = sample_times(t_final, n_times);
    let curves: Vec<Result<ErrorCurve>> = grid
        .par_iter()
        .map(|&p| builder(p).and_then(|ens| error_curve(&ens, t_final, n_times, n_steps, opts)))
        .collect();

    let mut q_error = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    let mut max_gap: f64 = 0.0;
    let mut max_iterations = 0;
    for (&p, curve) in grid.iter().zip(curves) {
        match curve {
            Ok(c) => {
                max_gap = max_gap.max(c.max_gap);
                max_iterations = max_iterations.max(c.max_iterations);
                q_error.push(c.q_error);
            }
            Err(e) => {
                failures.push((p, e.to_string()));
                q_error.push(vec![f64::NAN; times.len()]);
            }
        }
    }
    let argmin_parameter = (0..times.len())
        .map(|k| {
            grid.iter()
                .zip(&q_error)
                .filter(|(_, row)| !row[k].is_nan())
                .min_by(|a, b| a.1[k].total_cmp(&b.1[k]))
                .map_or(f64::NAN, |(&p, _)| p)
        })
        .collect();
    Ok(SweepSurface {
        parameters: grid.to_vec(),
        times,
        q_error,
        argmin_parameter,
        failures,
        max_gap,
        max_iterations,
    })
}
