use std::fmt;
use std::path::PathBuf;

/// Process exit codes shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Usage = 1,
    Input = 2,
    Decode = 3,
    Extractor = 4,
    Numeric = 5,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QcfError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: qcf_core::FormatError,
    },
    #[error("extractor: {0}")]
    Extractor(#[source] qcf_core::Error),
    #[error(transparent)]
    Core(#[from] qcf_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = QcfError> = std::result::Result<T, E>;

impl QcfError {
    pub fn exit_code(&self) -> ExitCode {
        use qcf_core::Error as E;
        match self {
            QcfError::Usage(_) => ExitCode::Usage,
            QcfError::Decode { .. } => ExitCode::Decode,
            QcfError::Extractor(_) => ExitCode::Extractor,
            QcfError::Core(E::Numeric(_)) => ExitCode::Numeric,
            QcfError::Core(E::Unavailable(_) | E::ZeroNormFeature) => ExitCode::Extractor,
            _ => ExitCode::Input,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| QcfError::Io { path, source }
    }
}

/// Stderr block written on numeric failures.
pub struct Diagnostic<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub error: &'a QcfError,
}

impl fmt::Display for Diagnostic<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "diagnostic:")?;
        writeln!(f, "  command: {}", self.command)?;
        writeln!(f, "  seed: {}", self.seed)?;
        writeln!(f, "  error: {}", self.error)?;
        let mut src = std::error::Error::source(self.error);
        while let Some(s) = src {
            writeln!(f, "  caused by: {s}")?;
            src = s.source();
        }
        Ok(())
    }
}
