use thiserror::Error;

/// Errors raised by the engine.
///
/// `Assertion` marks a build-stopping internal identity failure: a defining
/// equation that was solved for and then re-substituted did not hold.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    #[error("truncation mismatch: {0}")]
    TruncationMismatch(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid block `{block}`: {message}")]
    Semantic { block: String, message: String },

    #[error("missing block `{0}`")]
    MissingBlock(String),

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("image of `{generator}` is not homogeneous of degree {expected}")]
    Inhomogeneous { generator: String, expected: i32 },

    #[error("odd image of `{0}` does not square to zero within truncation")]
    OddSquare(String),

    #[error("matrix is not unimodular: {0}")]
    NotUnimodular(String),

    #[error("invalid formal exponential map at `{generator}`: {reason}")]
    InvalidFexp { generator: String, reason: String },

    #[error("invalid Grothendieck connection at `{generator}`: {reason}")]
    InvalidConnection { generator: String, reason: String },

    #[error("Euler reconstruction failed at resolution degree {order}: gradient for `{generator}` is not integrable")]
    NotIntegrable { order: u32, generator: String },

    #[error("formal exponential map is not proper")]
    NotProper,

    #[error("diffeomorphism check failed: {0}")]
    Diffeo(String),

    #[error("not closed: {0}")]
    NotClosed(String),

    #[error("not a body point: {0}")]
    NotBodyPoint(String),

    #[error("invalid QP structure: {0}")]
    InvalidQp(String),

    #[error("internal identity failed: {0}")]
    Assertion(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
