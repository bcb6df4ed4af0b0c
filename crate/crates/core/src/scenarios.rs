//! Hypothesis ensembles for the three physical settings, plus the qubit
//! state generators used by the three-state studies.
//!
//! Single qubits use `|g⟩ = index 0`, `|e⟩ = index 1`; multi-qubit registers
//! put site 0 in the leftmost Kronecker factor.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    c, embed_site, excited_projector, ground_projector, kron, pauli_x, pauli_y, sigma_minus,
    ComplexMatrix, ComplexVector, HermitianMatrix,
};
use crate::two_sided::HypothesisEnsemble;

/// Largest register accepted by [`cavity_ensemble`] (dimension 256).
pub const MAX_CAVITY_ATOMS: usize = 8;

/// Resonant drive with unknown phase on a decaying two-level atom.
#[derive(Debug, Clone)]
pub struct RabiConfig {
    pub omega: f64,
    pub gamma: f64,
    pub phases: Vec<f64>,
    pub priors: Vec<f64>,
    pub initial: HermitianMatrix,
}

impl RabiConfig {
    /// Phases `π(m−1)/2` for `m = 1..=4`, equal priors, atom in the ground
    /// state.
    pub fn four_phases(omega: f64, gamma: f64) -> Self {
        RabiConfig {
            omega,
            gamma,
            phases: (0..4).map(|m| std::f64::consts::FRAC_PI_2 * m as f64).collect(),
            priors: vec![0.25; 4],
            initial: HermitianMatrix::new(ground_projector()).expect("projector"),
        }
    }
}

pub fn rabi_ensemble(cfg: &RabiConfig) -> Result<HypothesisEnsemble> {
    if !(cfg.omega >= 0.0) {
        return Err(Error::InvalidInput(format!("omega must be non-negative, got {}", cfg.omega)));
    }
    if !(cfg.gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {}", cfg.gamma)));
    }
    for (i, a) in cfg.phases.iter().enumerate() {
        for b in &cfg.phases[..i] {
            let d = (a - b).rem_euclid(TAU);
            if d < 1e-12 || TAU - d < 1e-12 {
                return Err(Error::InvalidInput(format!("phases {b} and {a} coincide modulo 2π")));
            }
        }
    }
    let hamiltonians = cfg
        .phases
        .iter()
        .map(|&phi| {
            let h = (pauli_x() * c(phi.cos(), 0.0) + pauli_y() * c(phi.sin(), 0.0)) * c(cfg.omega / 2.0, 0.0);
            HermitianMatrix::new(h)
        })
        .collect::<Result<Vec<_>>>()?;
    let decay = sigma_minus() * c(cfg.gamma.sqrt(), 0.0);
    let channels = vec![vec![decay; cfg.phases.len()]];
    HypothesisEnsemble::new(hamiltonians, channels, cfg.priors.clone(), cfg.initial.clone())
}

/// Driven bad cavity with an unknown number `m = 1..=n_max` of coupled atoms.
#[derive(Debug, Clone)]
pub struct CavityConfig {
    pub g: f64,
    pub u: f64,
    pub kappa: f64,
    pub n_max: usize,
    pub mu: f64,
}

impl CavityConfig {
    /// Parameters with `γ_p = 1` (`g = 1`, `κ = 4`) and `α g = ratio · γ_p`.
    pub fn with_drive_ratio(ratio: f64, n_max: usize, mu: f64) -> Self {
        let g = 1.0;
        let kappa = 4.0;
        let gamma_p = 4.0 * g * g / kappa;
        let alpha = ratio * gamma_p / g;
        CavityConfig {
            g,
            u: alpha * kappa / 2.0,
            kappa,
            n_max,
            mu,
        }
    }

    pub fn alpha(&self) -> f64 {
        2.0 * self.u / self.kappa
    }

    /// Purcell-enhanced decay rate `4g²/κ`.
    pub fn gamma_p(&self) -> f64 {
        4.0 * self.g * self.g / self.kappa
    }
}

/// `P_m ∝ μ^m / m!` for `m = 1..=n_max`, normalized on that support.
pub fn poisson_priors(mu: f64, n_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_max);
    let mut term = 1.0;
    for m in 1..=n_max {
        term *= mu / m as f64;
        w.push(term);
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Collective lowering operator over the first `m` of `n_sites` atoms.
pub fn collective_lowering(m: usize, n_sites: usize) -> ComplexMatrix {
    let dim = 1 << n_sites;
    (0..m).fold(ComplexMatrix::zeros(dim, dim), |acc, i| acc + embed_site(&sigma_minus(), i, n_sites))
}

pub fn cavity_ensemble(cfg: &CavityConfig) -> Result<HypothesisEnsemble> {
    if !(cfg.kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {}", cfg.kappa)));
    }
    if cfg.n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    if cfg.n_max > MAX_CAVITY_ATOMS {
        return Err(Error::Dimension(format!(
            "n_max = {} exceeds the limit of {MAX_CAVITY_ATOMS} atoms",
            cfg.n_max
        )));
    }
    if !(cfg.mu > 0.0) {
        return Err(Error::InvalidInput(format!("mu must be positive, got {}", cfg.mu)));
    }
    let n = cfg.n_max;
    let dim = 1 << n;
    let alpha = cfg.alpha();
    let rate = cfg.gamma_p().sqrt();
    let mut hamiltonians = Vec::with_capacity(n);
    let mut decay = Vec::with_capacity(n);
    for m in 1..=n {
        let lower = collective_lowering(m, n);
        let raise = lower.adjoint();
        hamiltonians.push(HermitianMatrix::new((raise * c(alpha, 0.0) + &lower * c(alpha, 0.0)) * c(cfg.g, 0.0))?);
        decay.push(lower * c(rate, 0.0));
    }
    let mut ground = ComplexMatrix::zeros(dim, dim);
    ground[(0, 0)] = c(1.0, 0.0);
    HypothesisEnsemble::new(
        hamiltonians,
        vec![decay],
        poisson_priors(cfg.mu, n),
        HermitianMatrix::new(ground)?,
    )
}

/// Seven nearest distinct cubic sites in one octant, in units of the
/// lattice constant.
pub fn default_lattice_offsets() -> Vec<[f64; 3]> {
    vec![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
    ]
}

/// Sensor ion probing the position of a nearby qubit ion.
#[derive(Debug, Clone)]
pub struct LatticeConfig {
    pub omega_s: f64,
    pub delta_s: f64,
    pub omega_q: f64,
    pub gamma: f64,
    /// Dipole–dipole strength in units of `γ a³`, including local-field
    /// corrections.
    pub dipole_prefactor: f64,
    pub mu_s_dir: [f64; 3],
    pub mu_q_dir: [f64; 3],
    pub positions: Vec<[f64; 3]>,
    pub priors: Vec<f64>,
    /// State of qubit ⊗ sensor at `t = 0`.
    pub initial: HermitianMatrix,
}

impl LatticeConfig {
    /// `Ω_s = 3γ`, prefactor `5γa³`, both dipoles along `(0.5, 0.3, 0.8)`,
    /// seven default offsets with equal priors, excited qubit and ground
    /// sensor.
    pub fn reference(delta_s: f64, omega_q: f64) -> Self {
        let positions = default_lattice_offsets();
        let n = positions.len();
        LatticeConfig {
            omega_s: 3.0,
            delta_s,
            omega_q,
            gamma: 1.0,
            dipole_prefactor: 5.0,
            mu_s_dir: [0.5, 0.3, 0.8],
            mu_q_dir: [0.5, 0.3, 0.8],
            positions,
            priors: vec![1.0 / n as f64; n],
            initial: excited_qubit_ground_sensor(),
        }
    }

    pub fn shifts(&self) -> Result<Vec<f64>> {
        self.positions.iter().map(|r| dipole_shift(self, r)).collect()
    }
}

/// `|e_q⟩⟨e_q| ⊗ |g_s⟩⟨g_s|`.
pub fn excited_qubit_ground_sensor() -> HermitianMatrix {
    HermitianMatrix::new(kron(&excited_projector(), &ground_projector())).expect("projector")
}

fn unit(v: &[f64; 3], what: &str) -> Result<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} must be a nonzero finite vector")));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Static dipole–dipole shift of the sensor transition for a qubit at
/// offset `r`: `prefactor / |r|³ · [μ̂_s·μ̂_q − 3(μ̂_s·r̂)(μ̂_q·r̂)]`.
pub fn dipole_shift(cfg: &LatticeConfig, r: &[f64; 3]) -> Result<f64> {
    let dist = dot(r, r).sqrt();
    if dist == 0.0 {
        return Err(Error::InvalidInput("dipole shift is singular at zero offset".into()));
    }
    let r_hat = unit(r, "offset")?;
    let s = unit(&cfg.mu_s_dir, "sensor dipole direction")?;
    let q = unit(&cfg.mu_q_dir, "qubit dipole direction")?;
    let angular = dot(&s, &q) - 3.0 * dot(&s, &r_hat) * dot(&q, &r_hat);
    Ok(cfg.dipole_prefactor / (dist * dist * dist) * angular)
}

pub fn lattice_ensemble(cfg: &LatticeConfig) -> Result<HypothesisEnsemble> {
    if !(cfg.gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {}", cfg.gamma)));
    }
    let shifts = cfg.shifts()?;
    for (i, a) in shifts.iter().enumerate() {
        for (j, b) in shifts[..i].iter().enumerate() {
            if (a - b).abs() <= 1e-9 * cfg.gamma {
                return Err(Error::InvalidInput(format!(
                    "positions {j} and {i} give the same shift {a}"
                )));
            }
        }
    }
    let id = ComplexMatrix::identity(2, 2);
    let sensor_x = kron(&id, &pauli_x());
    let qubit_x = kron(&pauli_x(), &id);
    let sensor_e = kron(&id, &excited_projector());
    let both_e = kron(&excited_projector(), &excited_projector());
    let base = sensor_x * c(cfg.omega_s / 2.0, 0.0) + qubit_x * c(cfg.omega_q / 2.0, 0.0)
        - sensor_e * c(cfg.delta_s, 0.0);
    let hamiltonians = shifts
        .iter()
        .map(|&delta| HermitianMatrix::new(&base + &both_e * c(delta, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let decay = kron(&id, &sigma_minus()) * c(cfg.gamma.sqrt(), 0.0);
    let channels = vec![vec![decay; shifts.len()]];
    HypothesisEnsemble::new(hamiltonians, channels, cfg.priors.clone(), cfg.initial.clone())
}

/// Pure qubit state with Bloch vector `(sin θ, 0, cos θ)`.
pub fn planar_qubit_state(theta: f64) -> ComplexVector {
    ComplexVector::from_vec(vec![c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0)])
}

/// Three independent Haar-random pure qubit states, reproducible per seed.
pub fn random_qubit_triple(seed: u64) -> [ComplexVector; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let v = ComplexVector::from_vec(vec![c(x[0], x[1]), c(x[2], x[3])]);
        let n = v.norm();
        v / c(n, 0.0)
    };
    [draw(), draw(), draw()]
}

/// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a normalized qubit state, with
/// index 0 as the `+z` pole.
pub fn bloch_vector(v: &ComplexVector) -> [f64; 3] {
    let (a, b) = (v[0], v[1]);
    let off = a.conj() * b;
    [2.0 * off.re, 2.0 * off.im, a.norm_sqr() - b.norm_sqr()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn rabi_hamiltonians_follow_phase() {
        let cfg = RabiConfig::four_phases(2.0, 1.0);
        let ens = rabi_ensemble(&cfg).unwrap();
        let h = ens.hamiltonians();
        let w = c(1.0, 0.0); // Ω/2
        assert!(close(h[0].as_matrix(), &(pauli_x() * w), 1e-15));
        assert!(close(h[1].as_matrix(), &(pauli_y() * w), 1e-15));
        assert!(close(h[2].as_matrix(), &(pauli_x() * -w), 1e-15));
        assert!(close(h[3].as_matrix(), &(pauli_y() * -w), 1e-15));
        assert_eq!(ens.priors(), &[0.25; 4]);
        assert_eq!(ens.channels().len(), 1);
        assert!(ens.channels()[0].iter().all(|op| op == &sigma_minus()));
    }

    #[test]
    fn rabi_free_decay_and_validation() {
        let mut cfg = RabiConfig::four_phases(0.0, 0.5);
        cfg.phases = vec![0.0];
        cfg.priors = vec![1.0];
        let ens = rabi_ensemble(&cfg).unwrap();
        assert_eq!(ens.len(), 1);
        assert!(ens.hamiltonians()[0].iter().all(|z| z.norm() == 0.0));

        let mut bad = RabiConfig::four_phases(1.0, 1.0);
        bad.phases[1] = TAU;
        assert!(rabi_ensemble(&bad).is_err());
        bad = RabiConfig::four_phases(1.0, 0.0);
        assert!(rabi_ensemble(&bad).is_err());
    }

    #[test]
    fn poisson_priors_match_direct_evaluation() {
        let p = poisson_priors(1.5, 4);
        let raw = [1.5, 1.125, 0.5625, 0.2109375];
        let total: f64 = raw.iter().sum();
        for (a, b) in p.iter().zip(raw) {
            assert_abs_diff_eq!(*a, b / total, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(1.0 - p[0], 0.558620689655, epsilon = 1e-11);
    }

    #[test]
    fn cavity_operators() {
        let cfg = CavityConfig::with_drive_ratio(1.0, 4, 1.5);
        assert_abs_diff_eq!(cfg.gamma_p(), 1.0);
        assert_abs_diff_eq!(cfg.alpha() * cfg.g, 1.0);
        let ens = cavity_ensemble(&cfg).unwrap();
        assert_eq!(ens.dim(), 16);
        assert_eq!(ens.len(), 4);
        assert_eq!(ens.channels().len(), 1);
        assert_eq!(ens.channels()[0][0], embed_site(&sigma_minus(), 0, 4));
        assert_eq!(ens.initial_state()[(0, 0)], c(1.0, 0.0));

        let off = cavity_ensemble(&CavityConfig { g: 0.0, ..cfg.clone() }).unwrap();
        assert!(off.hamiltonians().iter().all(|h| h.iter().all(|z| z.norm() == 0.0)));
        assert!(off.channels()[0].iter().all(|op| op.iter().all(|z| z.norm() == 0.0)));

        assert!(matches!(
            cavity_ensemble(&CavityConfig { n_max: 9, ..cfg }),
            Err(Error::Dimension(_))
        ));
    }

    fn z_dipoles(prefactor: f64) -> LatticeConfig {
        LatticeConfig {
            dipole_prefactor: prefactor,
            mu_s_dir: [0.0, 0.0, 1.0],
            mu_q_dir: [0.0, 0.0, 1.0],
            ..LatticeConfig::reference(0.0, 0.0)
        }
    }

    #[test]
    fn dipole_shift_geometry() {
        let cfg = z_dipoles(5.0);
        assert_abs_diff_eq!(dipole_shift(&cfg, &[0.0, 0.0, 1.0]).unwrap(), -10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dipole_shift(&cfg, &[1.0, 0.0, 0.0]).unwrap(), 5.0, epsilon = 1e-14);
        assert!(dipole_shift(&cfg, &[0.0, 0.0, 0.0]).is_err());
        let r = [0.3, -1.2, 0.7];
        let base = dipole_shift(&cfg, &r).unwrap();
        let scaled = dipole_shift(&cfg, &[0.6, -2.4, 1.4]).unwrap();
        assert_abs_diff_eq!(scaled, base / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_shifts_are_distinct() {
        let shifts = LatticeConfig::reference(0.0, 0.0).shifts().unwrap();
        assert_eq!(shifts.len(), 7);
        for i in 0..7 {
            for j in 0..i {
                assert!((shifts[i] - shifts[j]).abs() > 1e-3, "{shifts:?}");
            }
        }
        let ens = lattice_ensemble(&LatticeConfig::reference(0.0, 0.0)).unwrap();
        assert_eq!(ens.dim(), 4);
        assert_eq!(ens.len(), 7);
    }

    #[test]
    fn lattice_rejects_degenerate_shifts() {
        let mut cfg = z_dipoles(5.0);
        cfg.positions = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        cfg.priors = vec![0.5, 0.5];
        assert!(lattice_ensemble(&cfg).is_err());
    }

    #[test]
    fn lattice_hamiltonian_blocks() {
        let cfg = LatticeConfig::reference(0.7, 0.0);
        let ens = lattice_ensemble(&cfg).unwrap();
        let shifts = cfg.shifts().unwrap();
        // qubit excited block (indices 2, 3) is a sensor with detuning δ_s − Δ_m
        for (h, d) in ens.hamiltonians().iter().zip(shifts) {
            assert_abs_diff_eq!(h[(2, 2)].re, 0.0);
            assert_abs_diff_eq!(h[(3, 3)].re, d - 0.7, epsilon = 1e-14);
            assert_abs_diff_eq!(h[(2, 3)].re, 1.5);
            assert_eq!(h[(0, 2)], c(0.0, 0.0));
        }
    }

    #[test]
    fn planar_states() {
        let v = planar_qubit_state(0.0);
        assert_eq!(v[0], c(1.0, 0.0));
        let v = planar_qubit_state(std::f64::consts::PI);
        assert_abs_diff_eq!(v[0].norm(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(v[1].re, 1.0);
        let b = bloch_vector(&planar_qubit_state(2.0 * std::f64::consts::PI / 3.0));
        assert_abs_diff_eq!(b[0], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 0.0);
        assert_abs_diff_eq!(b[2], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn random_triples_are_reproducible_and_uniform() {
        assert_eq!(random_qubit_triple(42), random_qubit_triple(42));
        assert_ne!(random_qubit_triple(42), random_qubit_triple(43));
        let mut mean = [0.0; 3];
        let samples = 10_000;
        for s in 0..samples / 3 + 1 {
            for v in random_qubit_triple(s as u64) {
                assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
                let b = bloch_vector(&v);
                for k in 0..3 {
                    mean[k] += b[k];
                }
            }
        }
        let count = 3.0 * (samples / 3 + 1) as f64;
        let mag = mean.iter().map(|m| (m / count).powi(2)).sum::<f64>().sqrt();
        assert!(mag <= 0.03, "mean Bloch vector magnitude {mag}");
    }
}
