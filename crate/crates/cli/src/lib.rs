//! Experiment runner for fracvolt-core: TOML configs in, report bundles out.
//!
//! A bundle is a directory with `manifest.toml`, CSV tables, a plain-text
//! `summary.txt` and `SHA256SUMS`. Exit codes: 0 all checks passed, 1 an
//! invariant check failed, 2 the config is invalid, 3 the run failed.

pub mod config;
pub mod experiments;
pub mod report;
pub mod selftest;

pub use config::ExperimentConfig;
pub use experiments::{experiment_by_name, experiment_names, experiments, Experiment};
pub use report::{Check, ReportBundle};

/// Thread count override read by the binary.
pub const THREADS_ENV: &str = "FRACVOLT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] fracvolt_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) => 3,
        }
    }
}

/// Loads, validates and runs a config, then writes its bundle under `out_dir`.
pub fn run(config_path: &std::path::Path) -> Result<(ReportBundle, std::path::PathBuf), RunError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let exp = experiment_by_name(&cfg.experiment).map_err(|e| RunError::Config(e.to_string()))?;
    let bundle = exp.run(&cfg)?;
    let dir = bundle.write(&cfg.out_dir)?;
    Ok((bundle, dir))
}
