use std::io;
use std::path::{Path, PathBuf};

/// Failure of a command, grouped by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Problem in the configuration file, with the offending line when known.
    #[error("{}: {message}", location(path, *line))]
    Config { path: PathBuf, line: Option<usize>, message: String },
    /// Configuration that parses but cannot be used for the requested command.
    #[error("configuration: {0}")]
    Invalid(String),
    /// A table on disk was built for a different microstructure.
    #[error("table {}: metadata mismatch: {message}", path.display())]
    TableMismatch { path: PathBuf, message: String },
    #[error("{0}")]
    Numerical(#[source] microfrac_core::Error),
    /// Malformed input file.
    #[error("{}: {message}", location(path, Some(*line)))]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn location(path: &Path, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("{}:{l}", path.display()),
        None => path.display().to_string(),
    }
}

impl From<microfrac_core::Error> for Error {
    fn from(e: microfrac_core::Error) -> Self {
        Error::Numerical(e)
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// 1 for configuration problems, 2 for numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Invalid(_) | Error::TableMismatch { .. } => 1,
            Error::Numerical(_) => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
