use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the numerical core can report.
///
/// Validation problems carry a field path (`edges[3].length`, `couplings.c1`)
/// so that callers parsing files can point at the offending entry.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{at}: non-positive length {value}")]
    NonPositiveLength { at: String, value: f64 },
    #[error("{at}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        at: String,
        expected: usize,
        found: usize,
    },
    #[error("{at}: dangling reference to {what}")]
    DanglingReference { at: String, what: String },
    #[error("{at}: {reason}")]
    InvalidGraph { at: String, reason: String },
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("ill-conditioned {what} (reciprocal condition {rcond:e})")]
    IllConditioned { what: String, rcond: f64 },
    #[error("ambiguous rank decision: singular value {value:e} inside tolerance band [{lo:e}, {hi:e}]")]
    AmbiguousRank { value: f64, lo: f64, hi: f64 },
    #[error("singular matching system at k = {re} + {im}i")]
    SingularMatching { re: f64, im: f64 },
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures of an iterative or root-finding procedure, as
    /// opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. }
                | Error::AmbiguousRank { .. }
                | Error::SingularMatching { .. }
                | Error::Bracketing(_)
                | Error::NonConvergence { .. }
                | Error::Degenerate(_)
        )
    }
}
