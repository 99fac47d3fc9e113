use rsfw::RsfwError;

/// Exit status 2 for configuration problems, 1 for everything that fails at run time.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

/// Bad parameters, dimensions and unreadable input files trace back to the
/// config; the rest are run-time failures.
impl From<RsfwError> for CliError {
    fn from(e: RsfwError) -> Self {
        match e {
            RsfwError::InvalidParameter(_)
            | RsfwError::InvalidDimension(_)
            | RsfwError::UnsupportedDimension(_)
            | RsfwError::InvalidSet(_)
            | RsfwError::DimensionMismatch { .. }
            | RsfwError::Io(_)
            | RsfwError::Parse(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
