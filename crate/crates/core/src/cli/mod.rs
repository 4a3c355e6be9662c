//! Command-line front end: configuration, experiment runner and exit codes.

pub mod config;
pub mod runner;

use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, ExperimentConfig, ExperimentKind, InitialState, RawConfig};
pub use runner::{run_experiment, RunSummary};

use crate::error::Error;

/// Experiment runner for the stochastic thin-film discretizations.
///
/// Settings come from an optional `key = value` file (`--config`) and are
/// overridden by flags. Every artifact starts with `#` lines echoing the
/// resolved settings.
#[derive(Debug, Parser)]
#[command(name = "thinfilm", version)]
pub struct Args {
    /// simulate | sample-invariant | invariance | exit-time | repulsion |
    /// entropy-balance | two-time | ldp-feasibility | ldp-rate
    pub experiment: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid size N.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long = "mobility-exponent")]
    pub mobility_exponent: Option<String>,
    /// Inverse temperature; `inf` runs the deterministic equation.
    #[arg(long)]
    pub beta: Option<String>,
    /// Time step; defaults to 1e-10·(50/N)⁴.
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long = "t-final")]
    pub t_final: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// gruen-rumpf | central-difference
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of trajectories or invariant samples.
    #[arg(long)]
    pub samples: Option<String>,
    /// Spatial lag of two-point statistics.
    #[arg(long = "delta-x")]
    pub delta_x: Option<String>,
    /// Observation lag of two-time statistics.
    #[arg(long = "delta-t")]
    pub delta_t: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<String>,
    #[arg(long = "record-stride")]
    pub record_stride: Option<String>,
    /// flat | invariant
    #[arg(long)]
    pub initial: Option<String>,
    /// Upper end of the repulsion fit range.
    #[arg(long = "h-max")]
    pub h_max: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long = "m-min")]
    pub m_min: Option<String>,
    #[arg(long = "m-max")]
    pub m_max: Option<String>,
    #[arg(long = "m-step")]
    pub m_step: Option<String>,
}

impl Args {
    /// Flag values as `(key, value)` overrides.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let fields: [(&'static str, &Option<String>); 21] = [
            ("experiment", &self.experiment),
            ("n", &self.n),
            ("mobility_exponent", &self.mobility_exponent),
            ("beta", &self.beta),
            ("dt", &self.dt),
            ("t_final", &self.t_final),
            ("seed", &self.seed),
            ("scheme", &self.scheme),
            ("samples", &self.samples),
            ("delta_x", &self.delta_x),
            ("delta_t", &self.delta_t),
            ("out", &self.out),
            ("threads", &self.threads),
            ("record_stride", &self.record_stride),
            ("initial", &self.initial),
            ("h_max", &self.h_max),
            ("gamma", &self.gamma),
            ("eta", &self.eta),
            ("m_min", &self.m_min),
            ("m_max", &self.m_max),
            ("m_step", &self.m_step),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v.clone())))
            .collect()
    }
}

/// One-line, machine-readable description of a failure.
pub fn error_line(e: &Error) -> String {
    format!("error kind={} message={}", e.kind(), e.to_string().replace('\n', " "))
}

/// Resolves and runs; returns the process exit code (0 success, 2 bad
/// configuration, 1 any other failure).
pub fn run(args: &Args) -> i32 {
    let result = parse_config(args.config.as_deref(), &args.overrides()).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(summary) => {
            for path in summary.artifacts {
                println!("{}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            if matches!(e, Error::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}
