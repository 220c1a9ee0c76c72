use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: arguments, configuration, data files or run directories.
    #[error("{0}")]
    Validation(String),

    /// The model or sampler failed on valid input.
    #[error("{0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<curemc_core::Error> for CliError {
    fn from(e: curemc_core::Error) -> Self {
        use curemc_core::Error as E;
        match e {
            E::Domain(_)
            | E::Dimension { .. }
            | E::Hyperparameters(_)
            | E::Config(_)
            | E::EmptyTrace
            | E::TooFewSamples { .. } => CliError::Validation(e.to_string()),
            E::Infeasible(_)
            | E::Degenerate(_)
            | E::ZeroVariance
            | E::Calibration(_)
            | E::Initialisation(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub(crate) fn json_error(path: &Path, e: serde_json::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}
