use prefdesign_core::CoreError;
use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data format error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Format { row: Option<usize>, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] CoreError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn format(row: Option<usize>, msg: impl Into<String>) -> Self {
        HarnessError::Format { row, message: msg.into() }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    /// 2 for configuration problems, 3 for unreadable or malformed data,
    /// 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Format { .. } | HarnessError::Io { .. } => 3,
            HarnessError::Numerical(_) => 4,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map(|p| p.line() as usize);
        HarnessError::Format { row, message: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
