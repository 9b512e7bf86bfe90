//! Experiment runner for `hidacur-core`: configuration files, result records,
//! CSV plot data and the `hidacur` command line.
//!
//! ```no_run
//! use hidacur::config::{ExperimentConfig, Kind};
//! let cfg = ExperimentConfig::load(Kind::Diverge, "configs/c6_divergence.json".as_ref())?;
//! let outcome = hidacur::run(&cfg)?;
//! # Ok::<(), hidacur::RunError>(())
//! ```

pub mod cases;
pub mod config;
pub mod experiments;
pub mod output;
pub mod parallel;

pub use experiments::{run, Outcome, Report};

/// Failure of a run, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Nonexistence {
        context: String,
        source: hidacur_core::Error,
    },

    #[error("{context}: {source}")]
    Numeric {
        context: String,
        source: hidacur_core::Error,
    },

    /// The numerics ran but contradicted an expectation stated in the config.
    #[error("{0}")]
    Reproduction(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn from_core(context: impl Into<String>, source: hidacur_core::Error) -> Self {
        let context = context.into();
        match source {
            hidacur_core::Error::Nonexistence { .. } => RunError::Nonexistence { context, source },
            source => RunError::Numeric { context, source },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric { .. } | RunError::Reproduction(_) => 3,
            RunError::Nonexistence { .. } => 4,
            RunError::Io(_) => 1,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Nonexistence { .. } => "nonexistence",
            RunError::Numeric { .. } => "numeric",
            RunError::Reproduction(_) => "reproduction",
            RunError::Io(_) => "io",
        }
    }
}

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");
