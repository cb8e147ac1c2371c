use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric parameter lies outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An exponent lies outside an open interval; both bounds are reported.
    #[error("{name} = {value} outside the admissible range ({lower}, {upper})")]
    Range {
        name: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    /// Derived exponents are mutually inconsistent (e.g. q <= r).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Malformed input shape (non-symmetric matrix, wrong dof count, ...).
    #[error("structural error: {0}")]
    Structure(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Boundary and divergence data violate the compatibility condition.
    #[error("incompatible data: |int g1 - int g2.n| = {residual:.3e} exceeds {tolerance:.1e}")]
    Incompatible { residual: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
