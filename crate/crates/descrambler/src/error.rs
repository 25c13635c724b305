use std::path::PathBuf;

use descrambler_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Structure { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// 3 for numerical failures, 2 for everything the caller can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(CoreError::Divergence { .. } | CoreError::Singular) => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Core(e) => match e {
                CoreError::Shape(_) => "shape",
                CoreError::Size(_) => "size",
                CoreError::Domain(_) => "domain",
                CoreError::Config(_) => "config",
                CoreError::NonFinite { .. } => "non-finite",
                CoreError::Structure(_) => "structure",
                CoreError::Design { .. } => "design",
                CoreError::Divergence { .. } => "divergence",
                CoreError::Singular => "singular",
            },
            AppError::Io { .. } => "io",
            AppError::Parse { .. } => "parse",
            AppError::Structure { .. } => "structure",
            AppError::Usage(_) => "usage",
            AppError::Csv(_) => "io",
        }
    }

    /// Single machine-readable line for standard error.
    pub fn diagnostic(&self) -> String {
        format!("error kind={} code={} message={:?}", self.kind(), self.exit_code(), self.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;
