use std::fmt;

use outsample::Error;

/// Failure of a command, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Lib(Error),
}

impl CliError {
    /// 2 config, 3 I/O, 4 dimension, 5 numerical inconsistency, 6 isolated point.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Lib(e) => match e {
                Error::Config(_) | Error::InvalidWeight { .. } => 2,
                Error::Format(_) => 3,
                Error::Dimension(_) | Error::Index { .. } | Error::EmptyTraining => 4,
                Error::IsolatedPoint { .. } => 6,
                Error::NotSymmetric { .. }
                | Error::NotPsd { .. }
                | Error::ZeroKernel
                | Error::NotInRkhs { .. }
                | Error::NumericalInconsistency(_)
                | Error::DegenerateSpectrum { .. } => 5,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration: {m}"),
            Self::Io(m) => write!(f, "i/o: {m}"),
            Self::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
