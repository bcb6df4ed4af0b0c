//! Executes a resolved config and writes its CSV tables and JSON sidecar.

use std::path::{Path, PathBuf};

use serde_json::json;

use openhyp::experiments::{angle_scan, error_curve, parameter_sweep, random_sampling_study, simplex_scan};
use openhyp::sdp::{effect_traces, solve_min_error};

use crate::config::{to_json, Mode, RunConfig, Sidecar};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Files written by a run and the solver statistics recorded in the sidecar.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub stats: serde_json::Value,
    /// Sweep points that failed; the rest of the sweep is still written.
    pub failures: usize,
}

/// Twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn trace_headers(n: usize) -> Vec<String> {
    (1..=n).map(|m| format!("trace_{m}")).collect()
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sidecar(path: &Path, cfg: &RunConfig, stats: &serde_json::Value) -> Result<(), CliError> {
    let sidecar = Sidecar {
        config: cfg.clone(),
        stats: stats.clone(),
        version: VERSION.to_string(),
    };
    let mut value = serde_json::to_value(&sidecar).expect("sidecar serializes");
    value["config"] = to_json(cfg);
    let text = serde_json::to_string_pretty(&value).expect("sidecar serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs a config that has been resolved for its mode.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let mode = cfg.mode.ok_or_else(|| CliError::Config("config has no mode".into()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join(format!("{}.csv", mode.name()));
    let mut files = vec![csv_path.clone()];
    let opts = cfg.solver();
    let mut failures = 0;

    let stats = match mode {
        Mode::Discriminate => {
            let ens = cfg.state_ensemble()?;
            let res = solve_min_error(&ens, opts)?;
            let traces = effect_traces(&res);
            let mut header: Vec<String> =
                ["q_error", "dual_bound", "duality_gap", "iterations"].iter().map(|s| s.to_string()).collect();
            header.extend(trace_headers(traces.len()));
            let mut row = vec![
                fmt_num(res.q_error),
                fmt_num(res.dual_bound()),
                fmt_num(res.duality_gap),
                res.iterations.to_string(),
            ];
            row.extend(traces.iter().map(|&t| fmt_num(t)));
            write_csv(&csv_path, &header, [row])?;
            json!({"max_gap": res.duality_gap, "max_iterations": res.iterations, "q_error": res.q_error})
        }
        Mode::Hypothesis => {
            let ens = cfg.ensemble()?;
            let (t_final, n_times, n_steps) = cfg.time_grid();
            let curve = error_curve(&ens, t_final, n_times, n_steps, opts)?;
            let mut header: Vec<String> = ["time", "q_error", "q_best"].iter().map(|s| s.to_string()).collect();
            header.extend(trace_headers(ens.len()));
            let rows = (0..curve.times.len()).map(|k| {
                let mut row = vec![fmt_num(curve.times[k]), fmt_num(curve.q_error[k]), fmt_num(curve.q_best[k])];
                row.extend(curve.traces[k].iter().map(|&t| fmt_num(t)));
                row
            });
            write_csv(&csv_path, &header, rows)?;
            json!({"max_gap": curve.max_gap, "max_iterations": curve.max_iterations})
        }
        Mode::AngleScan => {
            let grid = cfg.theta3_values.clone().unwrap_or_default();
            let pts = angle_scan(&grid, cfg.theta1.unwrap_or(0.0), cfg.theta2.unwrap_or(0.0), opts)?;
            let mut header: Vec<String> = ["theta3", "q_error"].iter().map(|s| s.to_string()).collect();
            header.extend(trace_headers(3));
            let rows = pts.iter().map(|p| {
                let mut row = vec![fmt_num(p.theta3), fmt_num(p.q_error)];
                row.extend(p.traces.iter().map(|&t| fmt_num(t)));
                row
            });
            write_csv(&csv_path, &header, rows)?;
            json!({
                "max_gap": pts.iter().map(|p| p.duality_gap).fold(0.0, f64::max),
                "max_iterations": pts.iter().map(|p| p.iterations).max().unwrap_or(0),
            })
        }
        Mode::SimplexScan => {
            let states = cfg.static_state_list()?;
            let scan = simplex_scan(&states, cfg.resolution.unwrap_or(2), opts)?;
            let mut header: Vec<String> = ["p1", "p2", "p3", "q_error", "pair_error", "all_active"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend(trace_headers(3));
            let rows = scan.points.iter().map(|p| {
                let mut row: Vec<String> = p.priors.iter().map(|&x| fmt_num(x)).collect();
                row.extend([fmt_num(p.q_error), fmt_num(p.pair_error), (p.all_active as u8).to_string()]);
                row.extend(p.traces.iter().map(|&t| fmt_num(t)));
                row
            });
            write_csv(&csv_path, &header, rows)?;
            json!({
                "max_gap": scan.max_gap(),
                "max_iterations": scan.max_iterations(),
                "active_fraction": scan.active_fraction(),
                "max_improvement": scan.max_improvement(),
            })
        }
        Mode::Sample => {
            let study = random_sampling_study(
                cfg.n_samples.unwrap_or(1),
                cfg.resolution.unwrap_or(2),
                cfg.seed.unwrap_or(0),
                opts,
            )?;
            let header: Vec<String> = ["p1", "p2", "p3", "active_fraction"].iter().map(|s| s.to_string()).collect();
            let rows = study.grid.iter().zip(&study.active_fraction).map(|(p, &f)| {
                let mut row: Vec<String> = p.iter().map(|&x| fmt_num(x)).collect();
                row.push(fmt_num(f));
                row
            });
            write_csv(&csv_path, &header, rows)?;
            let areas_path = out_dir.join("sample_areas.csv");
            let header: Vec<String> = ["sample", "seed", "area_fraction"].iter().map(|s| s.to_string()).collect();
            let rows = study
                .seeds
                .iter()
                .zip(&study.area_fractions)
                .enumerate()
                .map(|(k, (s, &a))| vec![k.to_string(), s.to_string(), fmt_num(a)]);
            write_csv(&areas_path, &header, rows)?;
            files.push(areas_path);
            let max_area = study.area_fractions.iter().cloned().fold(0.0, f64::max);
            let mean_area = study.area_fractions.iter().sum::<f64>() / study.area_fractions.len() as f64;
            json!({
                "max_gap": study.max_gap,
                "max_iterations": study.max_iterations,
                "mean_area_fraction": mean_area,
                "max_area_fraction": max_area,
            })
        }
        Mode::Sweep => {
            let grid = cfg.sweep_values.clone().unwrap_or_default();
            let (t_final, n_times, n_steps) = cfg.time_grid();
            let surface = parameter_sweep(
                |v| {
                    cfg.with_parameter(v)
                        .and_then(|c| c.ensemble())
                        .map_err(|e| openhyp::error::Error::InvalidInput(e.to_string()))
                },
                &grid,
                t_final,
                n_times,
                n_steps,
                opts,
            )?;
            let header: Vec<String> =
                ["time", "parameter", "q_error", "argmin_parameter"].iter().map(|s| s.to_string()).collect();
            let rows = (0..surface.times.len()).flat_map(|k| {
                let surface = &surface;
                surface.parameters.iter().zip(&surface.q_error).map(move |(&p, row)| {
                    vec![
                        fmt_num(surface.times[k]),
                        fmt_num(p),
                        fmt_num(row[k]),
                        fmt_num(surface.argmin_parameter[k]),
                    ]
                })
            });
            write_csv(&csv_path, &header, rows)?;
            failures = surface.failures.len();
            let failed: Vec<_> = surface
                .failures
                .iter()
                .map(|(p, msg)| json!({"parameter": p, "error": msg}))
                .collect();
            json!({
                "max_gap": surface.max_gap,
                "max_iterations": surface.max_iterations,
                "failures": failed,
            })
        }
    };

    let sidecar_path = out_dir.join(format!("{}.json", mode.name()));
    write_sidecar(&sidecar_path, cfg, &stats)?;
    files.push(sidecar_path);
    Ok(RunOutcome { files, stats, failures })
}
