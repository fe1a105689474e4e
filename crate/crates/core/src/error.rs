use thiserror::Error;

/// Errors raised anywhere in the estimation / assignment / control pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model input rejected: {0}")]
    ModelInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("target {target} is out of measurement range of drone {drone} ({distance:.3} m > {radius:.3} m)")]
    OutOfRange {
        drone: usize,
        target: usize,
        distance: f64,
        radius: f64,
    },

    #[error("task table protocol error: {0}")]
    Protocol(String),

    #[error("task assignment did not converge after {rounds} rounds; unassigned targets {unassigned:?}")]
    AssignmentFailure { rounds: usize, unassigned: Vec<usize> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("run aborted at step {step}: {source}")]
    RunAborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ModelInput(_) => "model_input",
            Error::Config(_) => "config",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Protocol(_) => "protocol",
            Error::AssignmentFailure { .. } => "assignment_failure",
            Error::Numerical(_) => "numerical",
            Error::Analysis(_) => "analysis",
            Error::RunAborted { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::TomlDe(_) => "toml",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
