use std::fmt;
use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIDENCE: i32 = 3;
    pub const DEPTH_OVERFLOW: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A malformed input row; `row` is the one-based line in the file.
    Row {
        path: PathBuf,
        row: u64,
        message: String,
    },
    Detector(hecpd::Error),
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Detector(hecpd::Error::DepthOverflow { .. }) => exit::DEPTH_OVERFLOW,
            CliError::Detector(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Row { .. } | CliError::Output(_) => exit::IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Row { .. } => "input_row",
            CliError::Detector(hecpd::Error::DepthOverflow { .. }) => "depth_overflow",
            CliError::Detector(_) => "invalid_input",
            CliError::Output(_) => "output",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Row { path, row, message } => {
                write!(f, "{}: row {row}: {message}", path.display())
            }
            CliError::Detector(e) => write!(f, "{e}"),
            CliError::Output(msg) => write!(f, "cannot write output: {msg}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            CliError::Detector(e) => Some(e),
            _ => None,
        }
    }
}

impl From<hecpd::Error> for CliError {
    fn from(e: hecpd::Error) -> Self {
        CliError::Detector(e)
    }
}
