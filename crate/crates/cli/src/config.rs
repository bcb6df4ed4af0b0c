//! Run configuration files.
//!
//! A config is one flat JSON object. Complex numbers are `[re, im]` pairs and
//! matrices are lists of rows. Every key that is absent gets a default when
//! the config is resolved; keys that the selected mode or scenario does not
//! read are rejected so that typos surface early.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use openhyp::linalg::{c, ComplexMatrix, ComplexVector, HermitianMatrix};
use openhyp::scenarios::{
    cavity_ensemble, default_lattice_offsets, excited_qubit_ground_sensor, lattice_ensemble,
    planar_qubit_state, poisson_priors, rabi_ensemble, CavityConfig, LatticeConfig, RabiConfig,
};
use openhyp::sdp::{SolverOptions, StateEnsemble, DEFAULT_MAX_ITER, DEFAULT_TOL};
use openhyp::two_sided::HypothesisEnsemble;

use crate::error::CliError;

pub type VectorJson = Vec<[f64; 2]>;
pub type MatrixJson = Vec<VectorJson>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Discriminate,
    Hypothesis,
    AngleScan,
    SimplexScan,
    Sample,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Discriminate => "discriminate",
            Mode::Hypothesis => "hypothesis",
            Mode::AngleScan => "angle-scan",
            Mode::SimplexScan => "simplex-scan",
            Mode::Sample => "sample",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Rabi,
    Cavity,
    Lattice,
    Custom,
}

/// A user-defined hypothesis ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomEnsemble {
    pub dim: usize,
    pub hamiltonians: Vec<MatrixJson>,
    /// Channel rows; row `j` holds one jump operator per hypothesis.
    #[serde(default)]
    pub channels: Vec<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    pub initial_state: MatrixJson,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub scenario: Option<Scenario>,

    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub phases: Option<Vec<f64>>,

    pub g: Option<f64>,
    pub u: Option<f64>,
    pub kappa: Option<f64>,
    pub n_max: Option<usize>,
    pub mu: Option<f64>,

    pub omega_s: Option<f64>,
    pub delta_s: Option<f64>,
    pub omega_q: Option<f64>,
    pub dipole_prefactor: Option<f64>,
    pub mu_s_dir: Option<[f64; 3]>,
    pub mu_q_dir: Option<[f64; 3]>,
    pub positions: Option<Vec<[f64; 3]>>,

    pub custom: Option<CustomEnsemble>,

    pub priors: Option<Vec<f64>>,
    pub initial_state: Option<MatrixJson>,

    pub states: Option<Vec<MatrixJson>>,
    pub state_vectors: Option<Vec<VectorJson>>,
    pub thetas: Option<Vec<f64>>,

    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub theta3_values: Option<Vec<f64>>,
    pub theta3_count: Option<usize>,

    pub resolution: Option<usize>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,

    pub sweep_parameter: Option<String>,
    pub sweep_values: Option<Vec<f64>>,

    pub t_final: Option<f64>,
    pub n_times: Option<usize>,
    pub n_steps: Option<usize>,

    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Sidecar written next to every result; its `config` is a complete config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub config: RunConfig,
    pub stats: serde_json::Value,
    pub version: String,
}

const RABI_KEYS: &[&str] = &["omega", "gamma", "phases"];
const CAVITY_KEYS: &[&str] = &["g", "u", "kappa", "n_max", "mu"];
const LATTICE_KEYS: &[&str] = &[
    "omega_s",
    "delta_s",
    "omega_q",
    "gamma",
    "dipole_prefactor",
    "mu_s_dir",
    "mu_q_dir",
    "positions",
];
const TIME_KEYS: &[&str] = &["t_final", "n_times", "n_steps"];
const COMMON_KEYS: &[&str] = &["mode", "tol", "max_iter", "seed"];

pub const DEFAULT_T_FINAL: f64 = 5.0;
pub const DEFAULT_N_TIMES: usize = 101;
pub const DEFAULT_N_STEPS: usize = 2000;
pub const DEFAULT_RESOLUTION: usize = 50;
pub const DEFAULT_N_SAMPLES: usize = 1600;
pub const DEFAULT_THETA3_COUNT: usize = 360;

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}`: {msg}"))
}

/// Reads a config file or a sidecar written by an earlier run.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
    let is_sidecar = value.get("config").is_some_and(|v| v.is_object()) && value.get("version").is_some();
    if is_sidecar {
        serde_json::from_str::<Sidecar>(text)
            .map(|s| s.config)
            .map_err(|e| CliError::Config(format!("parse error: {e}")))
    } else {
        serde_json::from_str::<RunConfig>(text).map_err(|e| CliError::Config(format!("parse error: {e}")))
    }
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be at least {min}, got {v}")))
    }
}

fn check_priors(field: &str, priors: &[f64], n: usize) -> Result<(), CliError> {
    if priors.len() != n {
        return Err(invalid(field, format!("has {} entries, expected {n}", priors.len())));
    }
    if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(invalid(field, "entries must be finite and non-negative"));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid(field, format!("sums to {total}, expected 1")));
    }
    Ok(())
}

pub fn matrix_from_json(field: &str, m: &MatrixJson) -> Result<ComplexMatrix, CliError> {
    let n = m.len();
    if n == 0 {
        return Err(invalid(field, "matrix is empty"));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(
                field,
                format!("row {i} has {} entries; a {n}-row matrix must be square", row.len()),
            ));
        }
    }
    let out = ComplexMatrix::from_fn(n, n, |i, j| c(m[i][j][0], m[i][j][1]));
    if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(invalid(field, "non-finite entry"));
    }
    Ok(out)
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn hermitian_from_json(field: &str, m: &MatrixJson) -> Result<HermitianMatrix, CliError> {
    HermitianMatrix::new(matrix_from_json(field, m)?).map_err(|e| invalid(field, e))
}

fn vector_from_json(field: &str, v: &VectorJson) -> Result<ComplexVector, CliError> {
    if v.is_empty() {
        return Err(invalid(field, "vector is empty"));
    }
    Ok(ComplexVector::from_iterator(v.len(), v.iter().map(|z| c(z[0], z[1]))))
}

fn ensure_square_dim(field: &str, m: &ComplexMatrix, dim: usize) -> Result<(), CliError> {
    if m.nrows() != dim {
        return Err(invalid(field, format!("is {0}x{0}, expected {dim}x{dim}", m.nrows())));
    }
    Ok(())
}

impl RunConfig {
    fn set_keys(&self) -> Vec<String> {
        let value = serde_json::to_value(self).expect("config serializes");
        value
            .as_object()
            .expect("config is an object")
            .iter()
            .filter(|(_, v)| !v.is_null())
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Keys the mode and scenario read.
    fn allowed_keys(&self, mode: Mode) -> Vec<&'static str> {
        let mut keys = COMMON_KEYS.to_vec();
        match mode {
            Mode::Hypothesis | Mode::Sweep => {
                keys.push("scenario");
                keys.extend(TIME_KEYS);
                match self.scenario {
                    Some(Scenario::Rabi) => keys.extend(RABI_KEYS),
                    Some(Scenario::Cavity) => keys.extend(CAVITY_KEYS),
                    Some(Scenario::Lattice) => keys.extend(LATTICE_KEYS),
                    Some(Scenario::Custom) => keys.push("custom"),
                    None => {}
                }
                if self.scenario != Some(Scenario::Custom) {
                    keys.extend(["priors", "initial_state"]);
                }
                if mode == Mode::Sweep {
                    keys.extend(["sweep_parameter", "sweep_values"]);
                }
            }
            Mode::Discriminate => keys.extend(["states", "state_vectors", "thetas", "priors"]),
            Mode::AngleScan => keys.extend(["theta1", "theta2", "theta3_values", "theta3_count"]),
            Mode::SimplexScan => keys.extend(["states", "state_vectors", "thetas", "resolution"]),
            Mode::Sample => keys.extend(["n_samples", "resolution"]),
        }
        keys
    }

    /// Validates the config for `mode` and fills in every default.
    ///
    /// A `mode` stored in the file must agree with the requested one.
    pub fn resolve(&self, mode: Mode) -> Result<RunConfig, CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(invalid(
                    "mode",
                    format!("config is for `{}` but `{}` was requested", m.name(), mode.name()),
                ));
            }
        }
        let allowed = self.allowed_keys(mode);
        for key in self.set_keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(invalid(&key, format!("is not used by mode `{}` with this scenario", mode.name())));
            }
        }

        let mut r = self.clone();
        r.mode = Some(mode);
        r.tol = Some(positive("tol", self.tol.unwrap_or(DEFAULT_TOL))?);
        r.max_iter = Some(at_least("max_iter", self.max_iter.unwrap_or(DEFAULT_MAX_ITER), 1)?);

        match mode {
            Mode::Hypothesis | Mode::Sweep => {
                r.resolve_scenario(mode)?;
                r.t_final = Some(positive("t_final", self.t_final.unwrap_or(DEFAULT_T_FINAL))?);
                r.n_times = Some(at_least("n_times", self.n_times.unwrap_or(DEFAULT_N_TIMES), 1)?);
                r.n_steps = Some(at_least("n_steps", self.n_steps.unwrap_or(DEFAULT_N_STEPS), 1)?);
                if mode == Mode::Sweep {
                    r.resolve_sweep()?;
                }
                // builds once so that every scenario error is a config error
                r.ensemble()?;
            }
            Mode::Discriminate => {
                let ens = r.static_states("states", None)?;
                let priors = self.priors.clone().unwrap_or_else(|| vec![1.0 / ens.len() as f64; ens.len()]);
                check_priors("priors", &priors, ens.len())?;
                r.priors = Some(priors);
                r.state_ensemble()?;
            }
            Mode::AngleScan => {
                r.theta1 = Some(finite("theta1", self.theta1.unwrap_or(0.0))?);
                r.theta2 = Some(finite("theta2", self.theta2.unwrap_or(2.0 * PI / 3.0))?);
                match (&self.theta3_values, self.theta3_count) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("theta3_count", "give either theta3_values or theta3_count"))
                    }
                    (Some(v), None) => {
                        if v.is_empty() {
                            return Err(invalid("theta3_values", "must not be empty"));
                        }
                        for &t in v {
                            finite("theta3_values", t)?;
                        }
                    }
                    (None, count) => {
                        let n = at_least("theta3_count", count.unwrap_or(DEFAULT_THETA3_COUNT), 1)?;
                        r.theta3_values = Some((0..n).map(|k| TAU * k as f64 / n as f64).collect());
                        r.theta3_count = None;
                    }
                }
            }
            Mode::SimplexScan => {
                if self.states.is_none() && self.state_vectors.is_none() && self.thetas.is_none() {
                    r.thetas = Some((0..3).map(|m| TAU * m as f64 / 3.0).collect());
                }
                let n = r.static_states("states", Some(3))?.len();
                debug_assert_eq!(n, 3);
                r.resolution = Some(at_least("resolution", self.resolution.unwrap_or(DEFAULT_RESOLUTION), 2)?);
            }
            Mode::Sample => {
                r.n_samples = Some(at_least("n_samples", self.n_samples.unwrap_or(DEFAULT_N_SAMPLES), 1)?);
                r.resolution = Some(at_least("resolution", self.resolution.unwrap_or(DEFAULT_RESOLUTION), 2)?);
                r.seed = Some(self.seed.unwrap_or(0));
            }
        }
        Ok(r)
    }

    fn resolve_scenario(&mut self, mode: Mode) -> Result<(), CliError> {
        let scenario = self.scenario.ok_or_else(|| invalid("scenario", format!("is required by mode `{}`", mode.name())))?;
        match scenario {
            Scenario::Rabi => {
                self.omega = Some(self.omega.unwrap_or(2.0));
                self.gamma = Some(self.gamma.unwrap_or(1.0));
                let phases = self
                    .phases
                    .clone()
                    .unwrap_or_else(|| (0..4).map(|m| PI / 2.0 * m as f64).collect());
                if phases.is_empty() {
                    return Err(invalid("phases", "must not be empty"));
                }
                let n = phases.len();
                self.phases = Some(phases);
                self.priors = Some(self.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]));
                check_priors("priors", self.priors.as_ref().unwrap(), n)?;
            }
            Scenario::Cavity => {
                let default = CavityConfig::with_drive_ratio(1.0, 4, 1.5);
                self.g = Some(self.g.unwrap_or(default.g));
                self.u = Some(self.u.unwrap_or(default.u));
                self.kappa = Some(self.kappa.unwrap_or(default.kappa));
                self.n_max = Some(at_least("n_max", self.n_max.unwrap_or(default.n_max), 1)?);
                self.mu = Some(self.mu.unwrap_or(default.mu));
                let n = self.n_max.unwrap();
                match &self.priors {
                    Some(p) => check_priors("priors", p, n)?,
                    // a sweep over `mu` recomputes the priors at every point
                    None if self.sweep_parameter.as_deref() == Some("mu") => {}
                    None => self.priors = Some(poisson_priors(self.mu.unwrap(), n)),
                }
            }
            Scenario::Lattice => {
                let d = LatticeConfig::reference(0.0, 0.0);
                self.omega_s = Some(self.omega_s.unwrap_or(d.omega_s));
                self.delta_s = Some(self.delta_s.unwrap_or(d.delta_s));
                self.omega_q = Some(self.omega_q.unwrap_or(d.omega_q));
                self.gamma = Some(self.gamma.unwrap_or(d.gamma));
                self.dipole_prefactor = Some(self.dipole_prefactor.unwrap_or(d.dipole_prefactor));
                self.mu_s_dir = Some(self.mu_s_dir.unwrap_or(d.mu_s_dir));
                self.mu_q_dir = Some(self.mu_q_dir.unwrap_or(d.mu_q_dir));
                let positions = self.positions.clone().unwrap_or_else(default_lattice_offsets);
                if positions.is_empty() {
                    return Err(invalid("positions", "must not be empty"));
                }
                let n = positions.len();
                self.positions = Some(positions);
                self.priors = Some(self.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]));
                check_priors("priors", self.priors.as_ref().unwrap(), n)?;
            }
            Scenario::Custom => {
                let custom = self.custom.as_mut().ok_or_else(|| invalid("custom", "is required by scenario `custom`"))?;
                let n = custom.hamiltonians.len();
                if n == 0 {
                    return Err(invalid("custom.hamiltonians", "must not be empty"));
                }
                let priors = custom.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
                check_priors("custom.priors", &priors, n)?;
                custom.priors = Some(priors);
            }
        }
        Ok(())
    }

    fn resolve_sweep(&mut self) -> Result<(), CliError> {
        let name = self.sweep_parameter.clone().ok_or_else(|| invalid("sweep_parameter", "is required by mode `sweep`"))?;
        let allowed: &[&str] = match self.scenario {
            Some(Scenario::Rabi) => &["omega", "gamma"],
            Some(Scenario::Cavity) => &["g", "u", "kappa", "mu"],
            Some(Scenario::Lattice) => &["omega_s", "delta_s", "omega_q", "gamma", "dipole_prefactor"],
            _ => &[],
        };
        if !allowed.contains(&name.as_str()) {
            return Err(invalid(
                "sweep_parameter",
                format!("`{name}` cannot be swept for this scenario (allowed: {})", allowed.join(", ")),
            ));
        }
        if name == "mu" && self.priors.is_some() {
            return Err(invalid("priors", "fixed priors contradict a sweep over `mu`; omit them"));
        }
        let values = self.sweep_values.clone().ok_or_else(|| invalid("sweep_values", "is required by mode `sweep`"))?;
        if values.is_empty() {
            return Err(invalid("sweep_values", "must not be empty"));
        }
        for &v in &values {
            finite("sweep_values", v)?;
            self.with_parameter(v)?.ensemble()?;
        }
        Ok(())
    }

    /// Copy with the swept parameter set to `value`.
    pub fn with_parameter(&self, value: f64) -> Result<RunConfig, CliError> {
        let mut r = self.clone();
        let slot = match self.sweep_parameter.as_deref() {
            Some("omega") => &mut r.omega,
            Some("gamma") => &mut r.gamma,
            Some("g") => &mut r.g,
            Some("u") => &mut r.u,
            Some("kappa") => &mut r.kappa,
            Some("mu") => &mut r.mu,
            Some("omega_s") => &mut r.omega_s,
            Some("delta_s") => &mut r.delta_s,
            Some("omega_q") => &mut r.omega_q,
            Some("dipole_prefactor") => &mut r.dipole_prefactor,
            other => return Err(invalid("sweep_parameter", format!("unknown parameter {other:?}"))),
        };
        *slot = Some(value);
        Ok(r)
    }

    fn initial_or(&self, default: HermitianMatrix) -> Result<HermitianMatrix, CliError> {
        match &self.initial_state {
            Some(m) => hermitian_from_json("initial_state", m),
            None => Ok(default),
        }
    }

    /// Time-evolution ensemble described by a resolved scenario config.
    pub fn ensemble(&self) -> Result<HypothesisEnsemble, CliError> {
        let scenario = self.scenario.ok_or_else(|| invalid("scenario", "is required"))?;
        let field = |name: &'static str| move |e: openhyp::error::Error| invalid(name, e);
        match scenario {
            Scenario::Rabi => {
                let initial = self.initial_or(HermitianMatrix::new(openhyp::linalg::ground_projector()).expect("projector"))?;
                rabi_ensemble(&RabiConfig {
                    omega: self.omega.unwrap_or(2.0),
                    gamma: self.gamma.unwrap_or(1.0),
                    phases: self.phases.clone().unwrap_or_default(),
                    priors: self.priors.clone().unwrap_or_default(),
                    initial,
                })
                .map_err(field("scenario"))
            }
            Scenario::Cavity => {
                let cfg = CavityConfig {
                    g: self.g.unwrap_or(1.0),
                    u: self.u.unwrap_or(2.0),
                    kappa: self.kappa.unwrap_or(4.0),
                    n_max: self.n_max.unwrap_or(4),
                    mu: self.mu.unwrap_or(1.5),
                };
                let mut ens = cavity_ensemble(&cfg).map_err(field("scenario"))?;
                if let Some(p) = &self.priors {
                    ens = ens.with_priors(p.clone()).map_err(field("priors"))?;
                }
                if let Some(m) = &self.initial_state {
                    let rho = hermitian_from_json("initial_state", m)?;
                    ens = ens.with_initial_state(rho).map_err(field("initial_state"))?;
                }
                Ok(ens)
            }
            Scenario::Lattice => {
                let d = LatticeConfig::reference(0.0, 0.0);
                let positions = self.positions.clone().unwrap_or(d.positions);
                let n = positions.len();
                lattice_ensemble(&LatticeConfig {
                    omega_s: self.omega_s.unwrap_or(d.omega_s),
                    delta_s: self.delta_s.unwrap_or(d.delta_s),
                    omega_q: self.omega_q.unwrap_or(d.omega_q),
                    gamma: self.gamma.unwrap_or(d.gamma),
                    dipole_prefactor: self.dipole_prefactor.unwrap_or(d.dipole_prefactor),
                    mu_s_dir: self.mu_s_dir.unwrap_or(d.mu_s_dir),
                    mu_q_dir: self.mu_q_dir.unwrap_or(d.mu_q_dir),
                    positions,
                    priors: self.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]),
                    initial: self.initial_or(excited_qubit_ground_sensor())?,
                })
                .map_err(field("scenario"))
            }
            Scenario::Custom => {
                let custom = self.custom.as_ref().ok_or_else(|| invalid("custom", "is required"))?;
                custom_ensemble(custom)
            }
        }
    }

    /// States for the static modes, from exactly one of `states`,
    /// `state_vectors` and `thetas`.
    fn static_states(&self, field: &str, count: Option<usize>) -> Result<Vec<HermitianMatrix>, CliError> {
        let given = [self.states.is_some(), self.state_vectors.is_some(), self.thetas.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(invalid(field, "give exactly one of `states`, `state_vectors` or `thetas`"));
        }
        let states: Vec<HermitianMatrix> = if let Some(ms) = &self.states {
            ms.iter()
                .enumerate()
                .map(|(i, m)| hermitian_from_json(&format!("states[{i}]"), m))
                .collect::<Result<_, _>>()?
        } else if let Some(vs) = &self.state_vectors {
            vs.iter()
                .enumerate()
                .map(|(i, v)| {
                    let name = format!("state_vectors[{i}]");
                    let v = vector_from_json(&name, v)?;
                    let norm = v.norm();
                    if !(norm > 0.0 && norm.is_finite()) {
                        return Err(invalid(&name, "has zero norm"));
                    }
                    Ok(HermitianMatrix::projector(&(v / c(norm, 0.0))))
                })
                .collect::<Result<_, _>>()?
        } else {
            let thetas = self.thetas.as_ref().unwrap();
            for &t in thetas {
                finite("thetas", t)?;
            }
            thetas.iter().map(|&t| HermitianMatrix::projector(&planar_qubit_state(t))).collect()
        };
        let name = if self.states.is_some() {
            "states"
        } else if self.state_vectors.is_some() {
            "state_vectors"
        } else {
            "thetas"
        };
        if states.is_empty() {
            return Err(invalid(name, "must not be empty"));
        }
        if let Some(n) = count {
            if states.len() != n {
                return Err(invalid(name, format!("has {} entries, expected {n}", states.len())));
            }
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(invalid(name, "states differ in dimension"));
        }
        Ok(states)
    }

    pub fn static_state_list(&self) -> Result<Vec<HermitianMatrix>, CliError> {
        self.static_states("states", None)
    }

    /// Ensemble for the `discriminate` mode.
    pub fn state_ensemble(&self) -> Result<StateEnsemble, CliError> {
        let states = self.static_states("states", None)?;
        let n = states.len();
        let priors = self.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
        StateEnsemble::new(states, priors).map_err(|e| invalid("states", e))
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol.unwrap_or(DEFAULT_TOL),
            max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
        }
    }

    pub fn time_grid(&self) -> (f64, usize, usize) {
        (
            self.t_final.unwrap_or(DEFAULT_T_FINAL),
            self.n_times.unwrap_or(DEFAULT_N_TIMES),
            self.n_steps.unwrap_or(DEFAULT_N_STEPS),
        )
    }
}

fn custom_ensemble(custom: &CustomEnsemble) -> Result<HypothesisEnsemble, CliError> {
    let dim = custom.dim;
    if dim == 0 {
        return Err(invalid("custom.dim", "must be at least 1"));
    }
    let n = custom.hamiltonians.len();
    let hamiltonians = custom
        .hamiltonians
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let name = format!("custom.hamiltonians[{i}]");
            let m = matrix_from_json(&name, h)?;
            ensure_square_dim(&name, &m, dim)?;
            HermitianMatrix::new(m).map_err(|e| invalid(&name, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut channels = Vec::with_capacity(custom.channels.len());
    for (j, row) in custom.channels.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(
                &format!("custom.channels[{j}]"),
                format!("has {} operators, expected one per hypothesis ({n})", row.len()),
            ));
        }
        let ops = row
            .iter()
            .enumerate()
            .map(|(m, op)| {
                let name = format!("custom.channels[{j}][{m}]");
                let a = matrix_from_json(&name, op)?;
                ensure_square_dim(&name, &a, dim)?;
                Ok(a)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        channels.push(ops);
    }
    let initial = hermitian_from_json("custom.initial_state", &custom.initial_state)?;
    ensure_square_dim("custom.initial_state", &initial, dim)?;
    let priors = custom.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
    HypothesisEnsemble::new(hamiltonians, channels, priors, initial).map_err(|e| invalid("custom", e))
}

/// The resolved config as JSON with absent fields omitted.
pub fn to_json(cfg: &RunConfig) -> serde_json::Value {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.retain(|_, v| !v.is_null());
    }
    value
}
