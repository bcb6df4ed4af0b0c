//! Command-line front end for the `openhyp` library.

pub mod config;
pub mod error;
pub mod run;
pub mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, Mode, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "openhyp", version, about = "Minimum-error hypothesis testing for open quantum systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run config, or a sidecar written by an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for CSV and JSON results.
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum-error discrimination of fixed states.
    Discriminate(CommonArgs),
    /// Error probability versus measurement time for one scenario.
    Hypothesis(CommonArgs),
    /// Three planar qubit states with the third one rotated.
    AngleScan(CommonArgs),
    /// Three states over the prior simplex.
    SimplexScan(CommonArgs),
    /// Simplex scans of random qubit triples.
    Sample(CommonArgs),
    /// Error surface over one scenario parameter.
    Sweep(CommonArgs),
    /// Convergence, round-trip and certificate checks for a config.
    Verify(CommonArgs),
}

impl Command {
    fn parts(&self) -> (Option<Mode>, &CommonArgs) {
        match self {
            Command::Discriminate(a) => (Some(Mode::Discriminate), a),
            Command::Hypothesis(a) => (Some(Mode::Hypothesis), a),
            Command::AngleScan(a) => (Some(Mode::AngleScan), a),
            Command::SimplexScan(a) => (Some(Mode::SimplexScan), a),
            Command::Sample(a) => (Some(Mode::Sample), a),
            Command::Sweep(a) => (Some(Mode::Sweep), a),
            Command::Verify(a) => (None, a),
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(path)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cmd: &Command) -> Result<i32, CliError> {
    let (mode, args) = cmd.parts();
    let cfg = load(&args.config, args.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {:?} threads: {e}", args.threads)))?;

    match mode {
        Some(mode) => {
            let resolved = cfg.resolve(mode)?;
            let outcome = pool.install(|| run::run(&resolved, &args.output))?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.failures > 0 {
                eprintln!("{} sweep point(s) failed; see the sidecar", outcome.failures);
                return Ok(3);
            }
            Ok(0)
        }
        None => {
            let mode = cfg.mode.unwrap_or(Mode::Hypothesis);
            if !matches!(mode, Mode::Hypothesis | Mode::Sweep | Mode::Discriminate) {
                return Err(CliError::Config(format!(
                    "verify supports hypothesis, sweep and discriminate configs, not `{}`",
                    mode.name()
                )));
            }
            let resolved = cfg.resolve(mode)?;
            let report = pool.install(|| verify::verify(&resolved));
            print!("{report}");
            std::fs::create_dir_all(&args.output)?;
            let path = args.output.join("verify.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
            Ok(if report.passed() { 0 } else { 3 })
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
