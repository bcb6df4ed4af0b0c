//! Self-checks of a configured run: integrator convergence, embedding round
//! trip and the dual certificate at the final time.

use std::fmt;

use serde::Serialize;

use openhyp::embedding::{embed, reconstruct, DEFAULT_RANK_TOL};
use openhyp::experiments::solve_gram;
use openhyp::linalg::max_abs;
use openhyp::sdp::{dual_feasibility_floor, solve_min_error, verify_certificate};
use openhyp::two_sided::{convergence_check, integrate_gram_raw, GRAM_TOL};

use crate::config::{Mode, RunConfig};

pub const CONVERGENCE_TOL: f64 = 1e-7;
pub const ROUND_TRIP_TOL: f64 = 1e-8;
pub const CERTIFICATE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured residual; `None` when the check could not be evaluated.
    pub residual: Option<f64>,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let residual = c.residual.map_or_else(|| "n/a".to_string(), |r| format!("{r:.3e}"));
            write!(
                f,
                "{} {:<22} residual {:>10} threshold {:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                residual,
                c.threshold
            )?;
            if !c.detail.is_empty() {
                write!(f, "  ({})", c.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn check(name: &'static str, residual: f64, threshold: f64, detail: String) -> Check {
    Check {
        name,
        passed: residual <= threshold,
        residual: Some(residual),
        threshold,
        detail,
    }
}

fn failed(name: &'static str, threshold: f64, detail: String) -> Check {
    Check {
        name,
        passed: false,
        residual: None,
        threshold,
        detail,
    }
}

/// Runs the checks for a resolved config.
///
/// Static `discriminate` configs only have a certificate to check; the scan
/// and sampling modes have nothing to verify beyond what they report.
pub fn verify(cfg: &RunConfig) -> VerifyReport {
    let opts = cfg.solver();
    let mut checks = Vec::new();
    if cfg.mode == Some(Mode::Discriminate) {
        checks.push(match cfg.state_ensemble().and_then(|ens| {
            let res = solve_min_error(&ens, opts)?;
            Ok((ens, res))
        }) {
            Ok((ens, res)) => certificate_check(&ens, &res),
            Err(e) => failed("dual certificate", CERTIFICATE_TOL, e.to_string()),
        });
        return VerifyReport { checks };
    }

    let ens = match cfg.ensemble() {
        Ok(e) => e,
        Err(e) => {
            checks.push(failed("ensemble", 0.0, e.to_string()));
            return VerifyReport { checks };
        }
    };
    let (t_final, _, n_steps) = cfg.time_grid();

    checks.push(match convergence_check(&ens, t_final, n_steps) {
        Ok(r) => check("integrator convergence", r, CONVERGENCE_TOL, format!("n_steps {n_steps} vs {}", 2 * n_steps)),
        Err(e) => failed("integrator convergence", CONVERGENCE_TOL, e.to_string()),
    });

    let traj = match integrate_gram_raw(&ens, t_final, n_steps) {
        Ok(t) => t,
        Err(e) => {
            checks.push(failed("gram invariants", GRAM_TOL, e.to_string()));
            return VerifyReport { checks };
        }
    };
    checks.push(match traj.check_invariants(GRAM_TOL) {
        Ok(()) => check("gram invariants", 0.0, GRAM_TOL, String::new()),
        Err(e) => failed("gram invariants", GRAM_TOL, e.to_string()),
    });

    let mut worst: f64 = 0.0;
    let mut problem = None;
    for (t, g) in traj.times.iter().zip(&traj.grams) {
        match embed(g, ens.priors(), DEFAULT_RANK_TOL) {
            Ok(emb) => worst = worst.max(max_abs(&(reconstruct(&emb) - g))),
            Err(e) => {
                problem = Some(format!("at t = {t}: {e}"));
                break;
            }
        }
    }
    checks.push(match problem {
        None => check("embedding round trip", worst, ROUND_TRIP_TOL, format!("{} times", traj.times.len())),
        Some(msg) => failed("embedding round trip", ROUND_TRIP_TOL, msg),
    });

    let last = traj.grams.last().expect("trajectory has a sample at t = 0");
    checks.push(match solve_gram(last, ens.priors(), opts) {
        Ok(s) => certificate_check(&s.ensemble, &s.result),
        Err(e) => failed("dual certificate", CERTIFICATE_TOL, e.to_string()),
    });
    VerifyReport { checks }
}

fn certificate_check(ens: &openhyp::sdp::StateEnsemble, res: &openhyp::sdp::DiscriminationResult) -> Check {
    let floor = dual_feasibility_floor(res, ens).unwrap_or(f64::NEG_INFINITY);
    let residual = res.duality_gap.abs().max(-floor);
    Check {
        passed: verify_certificate(res, ens, CERTIFICATE_TOL),
        ..check(
            "dual certificate",
            residual,
            CERTIFICATE_TOL,
            format!("gap {:.3e}, eigenvalue floor {:.3e}", res.duality_gap, floor),
        )
    }
}
