use std::fmt;
use std::process::ExitCode;

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Input(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<pcdag::Error> for CliError {
    fn from(e: pcdag::Error) -> Self {
        use pcdag::Error::*;
        let msg = e.to_string();
        match e {
            InvalidArgument(_) | Unsupported(_) => CliError::Usage(msg),
            Input(_) | DimensionMismatch { .. } | GraphContract(_) => CliError::Input(msg),
            Cycle
            | InvalidCpdag { .. }
            | SingularConditioning
            | NotPositiveDefinite
            | FisherDomain(_)
            | DegenerateScale
            | Tuning(_) => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
