//! Config-driven experiments over the `pathwise` library.
//!
//! Every run writes its CSV tables and a `manifest.txt` into one directory.
//! The manifest's `config.` lines rebuild the exact config, so a run can be
//! repeated byte for byte.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;

use config::ExperimentConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<pathwise::Error> for CliError {
    fn from(e: pathwise::Error) -> Self {
        use pathwise::Error as E;
        match e {
            E::Factorization { .. } | E::Numerical(_) | E::Coverage { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Runs the experiment and writes its tables plus the manifest. Returns the file names written.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    cfg.validate()?;
    let tables = runner::run(cfg)?;
    let dir = output::out_dir(cfg)?;
    let mut names = Vec::with_capacity(tables.len());
    for t in &tables {
        output::write_atomic(&dir.join(&t.name), &t.render())?;
        names.push(t.name.clone());
    }
    output::write_atomic(&dir.join("manifest.txt"), &output::manifest(cfg, &names))?;
    names.push("manifest.txt".into());
    Ok(names)
}
