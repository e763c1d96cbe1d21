use std::fmt;

/// Failures of the file layer and the command line, with the exit code
/// each maps to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or invalid input, addressed by field path.
    #[error("{at}: {msg}")]
    Format { at: String, msg: String },
    #[error("JSON syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] qgraph_core::Error),
    #[error("acceptance window violated: {0}")]
    Acceptance(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

impl Error {
    pub fn format(at: impl fmt::Display, msg: impl fmt::Display) -> Self {
        Error::Format {
            at: at.to_string(),
            msg: msg.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            Error::Acceptance(_) => EXIT_ACCEPTANCE,
            _ => EXIT_INVALID,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Syntax {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}
