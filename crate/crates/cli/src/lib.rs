//! Library side of the `efrb` command: scenario runs, chain inspection and
//! the timing benchmarks.

pub mod bench;
pub mod inspect;
pub mod run;

/// Failures that map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Scenario(#[from] efrb_simnet::ScenarioError),
    #[error(transparent)]
    Ledger(#[from] efrb_core::ledger::LedgerError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}
