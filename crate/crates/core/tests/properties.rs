use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use openhyp::embedding::{densities, embed, reconstruct, DEFAULT_RANK_TOL};
use openhyp::experiments::{best_pair_error, error_curve, simplex_scan};
use openhyp::linalg::{
    c, eig_hermitian, excited_projector, ground_projector, kron, max_abs, pauli_z, sigma_minus,
    ComplexMatrix, ComplexVector, HermitianMatrix, C64,
};
use openhyp::random::{random_density, random_gram, random_pure};
use openhyp::scenarios::{
    cavity_ensemble, lattice_ensemble, planar_qubit_state, rabi_ensemble, CavityConfig, LatticeConfig,
    RabiConfig,
};
use openhyp::sdp::{
    dual_feasibility_floor, helstrom, solve_min_error, verify_certificate, SolverOptions, StateEnsemble,
};
use openhyp::two_sided::{
    convergence_check, integrate_gram, integrate_gram_raw, propagate_pair, HypothesisEnsemble,
};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_priors(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    use rand::Rng;
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    let rest: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - rest;
    p
}

fn certified(ens: &StateEnsemble) -> openhyp::sdp::DiscriminationResult {
    let res = solve_min_error(ens, opts()).unwrap();
    assert!(res.duality_gap <= 1e-7, "gap {}", res.duality_gap);
    assert!(dual_feasibility_floor(&res, ens).unwrap() >= -1e-7);
    assert!(verify_certificate(&res, ens, 1e-7));
    res
}

#[test]
fn two_states_match_helstrom() {
    let mut r = rng(11);
    for k in 0..40 {
        let dim = 2 + k % 3;
        let states = vec![random_density(&mut r, dim, 1 + k % dim), random_density(&mut r, dim, dim)];
        let priors = random_priors(&mut r, 2);
        let ens = StateEnsemble::new(states.clone(), priors.clone()).unwrap();
        let res = certified(&ens);
        let want = helstrom(&states[0], &states[1], priors[0], priors[1]).unwrap();
        assert_abs_diff_eq!(res.q_error, want, epsilon = 1e-6);
    }
}

#[test]
fn guessing_bound_and_weak_duality() {
    let mut r = rng(12);
    for k in 0..20 {
        let n = 3 + k % 3;
        let dim = 2 + k % 2;
        let states = (0..n).map(|_| random_density(&mut r, dim, 1 + k % dim)).collect();
        let priors = random_priors(&mut r, n);
        let pmax = priors.iter().cloned().fold(0.0, f64::max);
        let ens = StateEnsemble::new(states, priors).unwrap();
        let res = certified(&ens);
        assert!(res.q_error <= 1.0 - pmax + 1e-9);
        assert!(res.q_error >= -1e-9);
        assert!(res.dual_bound() <= res.q_error + 1e-12);
    }
}

#[test]
fn permuting_hypotheses_permutes_the_solution() {
    let mut r = rng(13);
    let perm = [2, 0, 1];
    for _ in 0..10 {
        let states: Vec<_> = (0..3).map(|_| random_density(&mut r, 3, 3)).collect();
        let priors = random_priors(&mut r, 3);
        let a = certified(&StateEnsemble::new(states.clone(), priors.clone()).unwrap());
        let b = certified(
            &StateEnsemble::new(
                perm.iter().map(|&i| states[i].clone()).collect(),
                perm.iter().map(|&i| priors[i]).collect(),
            )
            .unwrap(),
        );
        assert_abs_diff_eq!(a.q_error, b.q_error, epsilon = 1e-8);
        for (k, &i) in perm.iter().enumerate() {
            let diff = b.povm.effects[k].as_matrix() - a.povm.effects[i].as_matrix();
            assert!(max_abs(&diff) <= 1e-5, "effect {k} differs by {}", max_abs(&diff));
        }
    }
}

#[test]
fn depolarizing_never_helps() {
    let mut r = rng(14);
    for _ in 0..10 {
        let dim = 2;
        let states: Vec<_> = (0..3).map(|_| random_density(&mut r, dim, 1)).collect();
        let priors = random_priors(&mut r, 3);
        let clean = certified(&StateEnsemble::new(states.clone(), priors.clone()).unwrap()).q_error;
        for eps in [0.1, 0.3] {
            let mixed = states
                .iter()
                .map(|s| s.scale(1.0 - eps).add(&HermitianMatrix::identity(dim).scale(eps / dim as f64)))
                .collect();
            let q = certified(&StateEnsemble::new(mixed, priors.clone()).unwrap()).q_error;
            assert!(q >= clean - 1e-8, "eps {eps}: {q} < {clean}");
        }
    }
}

#[test]
fn embedding_round_trip_on_random_grams() {
    let mut r = rng(15);
    for k in 0..100 {
        let n = 1 + k % 8;
        let rank = if k % 3 == 0 { 1 + (k / 3) % n } else { n };
        let g = random_gram(&mut r, n, rank);
        let emb = embed(&g, &vec![1.0 / n as f64; n], DEFAULT_RANK_TOL).unwrap();
        assert!(max_abs(&(reconstruct(&emb) - &g)) <= 1e-8);
        assert!(emb.rank <= rank);
        for m in 0..n {
            assert_abs_diff_eq!(emb.coeffs.column(m).norm(), 1.0, epsilon = 1e-10);
            assert!(emb.coeffs[(m, m)].im == 0.0 && emb.coeffs[(m, m)].re >= 0.0);
            for row in m + 1..n {
                assert_eq!(emb.coeffs[(row, m)], c(0.0, 0.0));
            }
        }
    }
}

#[test]
fn rephasing_the_gram_leaves_the_error_unchanged() {
    let mut r = rng(16);
    for _ in 0..5 {
        let n = 4;
        let g = random_gram(&mut r, n, 3);
        let phases: Vec<_> = (0..n).map(|k| c(0.0, 0.7 * k as f64 + 0.3).exp()).collect();
        let d = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(phases));
        let g2 = d.adjoint() * &g * &d;
        let priors = [0.1, 0.2, 0.3, 0.4];
        let solve = |g: &ComplexMatrix| {
            let emb = embed(g, &priors, DEFAULT_RANK_TOL).unwrap();
            certified(&StateEnsemble::new(densities(&emb), priors.to_vec()).unwrap()).q_error
        };
        assert_abs_diff_eq!(solve(&g), solve(&g2), epsilon = 1e-7);
    }
}

fn scenario_ensembles() -> Vec<(&'static str, HypothesisEnsemble, f64)> {
    vec![
        ("rabi", rabi_ensemble(&RabiConfig::four_phases(2.0, 1.0)).unwrap(), 5.0),
        ("cavity", cavity_ensemble(&CavityConfig::with_drive_ratio(1.0, 3, 1.5)).unwrap(), 4.0),
        ("lattice", lattice_ensemble(&LatticeConfig::reference(-0.8, 0.5)).unwrap(), 6.0),
    ]
}

#[test]
fn diagonal_blocks_stay_densities() {
    for (name, ens, t) in scenario_ensembles() {
        for n in 0..ens.len() {
            let mut worst_trace: f64 = 0.0;
            let mut worst_eig: f64 = 0.0;
            propagate_pair(&ens, n, n, t, 1000, |k, rho| {
                if k % 50 == 0 {
                    worst_trace = worst_trace.max((rho.trace() - c(1.0, 0.0)).norm());
                    let h = HermitianMatrix::new((rho + rho.adjoint()) * c(0.5, 0.0)).unwrap();
                    worst_eig = worst_eig.min(eig_hermitian(&h).unwrap().values[0]);
                }
            })
            .unwrap();
            assert!(worst_trace <= 1e-8, "{name} hypothesis {n}: trace error {worst_trace:e}");
            assert!(worst_eig >= -1e-8, "{name} hypothesis {n}: eigenvalue {worst_eig:e}");
        }
    }
}

#[test]
fn scenario_grams_round_trip() {
    for (name, ens, t) in scenario_ensembles() {
        let traj = integrate_gram(&ens, t, 1000).unwrap();
        for g in traj.grams.iter().step_by(25) {
            let emb = embed(g, ens.priors(), DEFAULT_RANK_TOL).unwrap();
            let err = max_abs(&(reconstruct(&emb) - g));
            assert!(err <= 1e-8, "{name}: round trip error {err:e}");
        }
    }
}

#[test]
fn rk4_is_fourth_order() {
    let ens = rabi_ensemble(&RabiConfig::four_phases(2.0, 1.0)).unwrap();
    let e1 = convergence_check(&ens, 5.0, 25).unwrap();
    let e2 = convergence_check(&ens, 5.0, 50).unwrap();
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    assert!(convergence_check(&ens, 5.0, 2000).unwrap() <= 1e-7);
}

fn unitary_overlap(h1: &HermitianMatrix, h2: &HermitianMatrix, psi: &ComplexVector, t: f64) -> C64 {
    let evolve = |h: &HermitianMatrix| {
        let e = eig_hermitian(h).unwrap();
        let phases = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            e.values.len(),
            e.values.iter().map(|&l| c(0.0, -l * t).exp()),
        ));
        &e.vectors * phases * e.vectors.adjoint() * psi
    };
    evolve(h1).dotc(&evolve(h2))
}

#[test]
fn unitary_limit_matches_exact_evolution() {
    let mut r = rng(17);
    for dim in 2..=4 {
        let hs: Vec<HermitianMatrix> = (0..3)
            .map(|_| {
                let a = random_density(&mut r, dim, dim);
                a.scale(3.0)
            })
            .collect();
        let psi = random_pure(&mut r, dim);
        let ens = HypothesisEnsemble::new(hs.clone(), vec![], vec![1.0 / 3.0; 3], HermitianMatrix::projector(&psi))
            .unwrap();
        let t = 4.0;
        let traj = integrate_gram(&ens, t, 2000).unwrap();
        for (k, g) in traj.grams.iter().enumerate().step_by(100) {
            for a in 0..3 {
                for b in 0..3 {
                    let want = unitary_overlap(&hs[a], &hs[b], &psi, traj.times[k]);
                    assert!((g[(a, b)] - want).norm() <= 1e-6);
                }
            }
        }
    }
}

#[test]
fn rabi_phase_shift_leaves_grams_invariant() {
    let base = RabiConfig::four_phases(2.0, 1.0);
    let mut shifted = base.clone();
    for p in &mut shifted.phases {
        *p += 0.9;
    }
    let a = integrate_gram(&rabi_ensemble(&base).unwrap(), 4.0, 800).unwrap();
    let b = integrate_gram(&rabi_ensemble(&shifted).unwrap(), 4.0, 800).unwrap();
    for (ga, gb) in a.grams.iter().zip(&b.grams) {
        assert!(max_abs(&(ga - gb)) <= 1e-8);
    }
}

#[test]
fn undriven_lattice_keeps_unimodular_overlaps() {
    let mut cfg = LatticeConfig::reference(0.4, 0.0);
    cfg.omega_s = 0.0;
    let ens = lattice_ensemble(&cfg).unwrap();
    let traj = integrate_gram(&ens, 5.0, 1000).unwrap();
    for g in &traj.grams {
        for z in g.iter() {
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-8);
        }
    }
}

#[test]
fn zero_channel_row_is_neutral() {
    let ens = rabi_ensemble(&RabiConfig::four_phases(2.0, 1.0)).unwrap();
    let padded = ens.with_channel_row(vec![ComplexMatrix::zeros(2, 2); 4]).unwrap();
    let a = integrate_gram_raw(&ens, 3.0, 300).unwrap();
    let b = integrate_gram_raw(&padded, 3.0, 300).unwrap();
    for (ga, gb) in a.grams.iter().zip(&b.grams) {
        assert!(max_abs(&(ga - gb)) <= 1e-12);
    }
}

#[test]
fn two_hypothesis_curve_is_pure_state_helstrom() {
    let omega = 1.3;
    let h = |s: f64| HermitianMatrix::new(pauli_z() * c(s * omega / 2.0, 0.0)).unwrap();
    let plus = HermitianMatrix::new(ComplexMatrix::from_element(2, 2, c(0.5, 0.0))).unwrap();
    let priors = vec![0.35, 0.65];
    let ens = HypothesisEnsemble::new(vec![h(1.0), h(-1.0)], vec![], priors.clone(), plus).unwrap();
    let curve = error_curve(&ens, 2.0 * std::f64::consts::PI / omega, 41, 1000, opts()).unwrap();
    for (t, q) in curve.times.iter().zip(&curve.q_error) {
        let s2 = (omega * t).cos().powi(2);
        let want = 0.5 * (1.0 - (1.0 - 4.0 * priors[0] * priors[1] * s2).sqrt());
        assert_abs_diff_eq!(*q, want, epsilon = 1e-6);
    }
}

#[test]
fn decaying_qubit_overlap() {
    let gamma: f64 = 0.7;
    let zero = HermitianMatrix::zeros(2);
    let ens = HypothesisEnsemble::new(
        vec![zero.clone(), zero],
        vec![vec![sigma_minus() * c(gamma.sqrt(), 0.0), ComplexMatrix::zeros(2, 2)]],
        vec![0.5, 0.5],
        HermitianMatrix::new(excited_projector()).unwrap(),
    )
    .unwrap();
    let traj = integrate_gram(&ens, 6.0, 1000).unwrap();
    for (t, g) in traj.times.iter().zip(&traj.grams) {
        assert!((g[(0, 1)] - c((-gamma * t / 2.0).exp(), 0.0)).norm() <= 1e-6);
    }
}

#[test]
fn outside_the_active_region_a_pair_decides() {
    let states: Vec<_> =
        [0.0, 2.0, 4.2].iter().map(|&t| HermitianMatrix::projector(&planar_qubit_state(t))).collect();
    let scan = simplex_scan(&states, 20, opts()).unwrap();
    let mut checked = 0;
    for p in scan.points.iter().filter(|p| !p.all_active) {
        assert_abs_diff_eq!(p.q_error, p.pair_error, epsilon = 1e-6);
        checked += 1;
    }
    assert!(checked > 0);
    for p in &scan.points {
        assert!(p.q_error <= p.pair_error + 1e-8);
        assert_abs_diff_eq!(p.pair_error, best_pair_error(&states, &p.priors).unwrap(), epsilon = 0.0);
    }
}

#[test]
fn cavity_qubits_are_site_ordered() {
    let ens = cavity_ensemble(&CavityConfig::with_drive_ratio(1.0, 2, 1.5)).unwrap();
    let gp = CavityConfig::with_drive_ratio(1.0, 2, 1.5).gamma_p();
    let want = kron(&sigma_minus(), &ComplexMatrix::identity(2, 2)) * c(gp.sqrt(), 0.0);
    assert!(max_abs(&(&ens.channels()[0][0] - want)) <= 1e-15);
    assert_eq!(ens.initial_state().as_matrix(), &kron(&ground_projector(), &ground_projector()));
}
