use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum CoalError {
    /// A malformed input row, reported with source file and line number.
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },

    /// A semantic violation in otherwise well-formed data.
    #[error("data error: {0}")]
    Data(String),

    /// A degenerate numeric configuration (impossible statistics, empty
    /// domains, undefined normalisations).
    #[error("numeric degeneracy: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoalError {
    pub fn parse(file: impl Into<String>, line: u64, msg: impl Into<String>) -> Self {
        CoalError::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 3 for data problems, 4 for numeric degeneracy.
    /// Usage errors (code 2) are handled by the argument parser.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoalError::Numeric(_) => 4,
            _ => 3,
        }
    }
}
