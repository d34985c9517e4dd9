use thiserror::Error;

/// Errors raised by the conversion pipeline and its runtimes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("the pair (F, H) is not observable; reduce the controller first")]
    NotObservable,
    #[error("output matrix H does not have full row rank")]
    NotFullRowRank,
    #[error("period k = {0} maps two distinct eigenvalues of F onto the same k-th power")]
    InvalidPeriod(u32),
    #[error("matrix is not nilpotent")]
    NotNilpotent,
    #[error("plaintext matrix `{0}` has a non-integer entry")]
    NonIntegerPlaintext(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SingularMatrix => "SingularMatrix",
            Error::NotObservable => "NotObservable",
            Error::NotFullRowRank => "NotFullRowRank",
            Error::InvalidPeriod(_) => "InvalidPeriod",
            Error::NotNilpotent => "NotNilpotent",
            Error::NonIntegerPlaintext(_) => "NonIntegerPlaintext",
            Error::EmptyTrace => "EmptyTrace",
            Error::Parse(_) => "Parse",
        }
    }

    /// Validation errors reject the controller itself rather than the input plumbing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotObservable | Error::InvalidPeriod(_) | Error::NotFullRowRank
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::DimensionMismatch(msg.into()))
}
