use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] rennala_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "grid has {runs} runs, above max_runs = {cap}; estimated {grads:.2e} stochastic gradients, about {secs:.0} s on one thread"
    )]
    GridTooLarge {
        runs: u64,
        cap: u64,
        grads: f64,
        secs: f64,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 for failed checks, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed { .. } => 1,
            _ => 2,
        }
    }
}
