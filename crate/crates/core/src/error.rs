use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one exit-code class of the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("grid mismatch: expected {expected} values, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("candidate budget exceeded: dominating mass {mass:.3e} needs more than {cap} candidates")]
    CandidateBudgetExceeded { mass: f64, cap: f64 },
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("divergent query: {0}")]
    DivergentQuery(String),
    #[error("argument {0} outside the domain of the function")]
    OutOfDomain(f64),
    #[error("coincident points")]
    CoincidentPoints,
    #[error("degenerate loop: bounding box has zero area")]
    DegenerateLoop,
    #[error("matrix not positive semidefinite: most negative eigenvalue {min_eigenvalue:.3e}, jitter cap {cap:.3e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64, cap: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Exit-code class of an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Budget,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::ParameterOutOfRange(_)
            | Error::Config(_)
            | Error::PointOutsideDomain { .. }
            | Error::OutOfDomain(_)
            | Error::CoincidentPoints
            | Error::DivergentQuery(_) => ErrorClass::Config,
            Error::CandidateBudgetExceeded { .. } | Error::BudgetExceeded(_) => ErrorClass::Budget,
            Error::Io(_) | Error::Format(_) => ErrorClass::Io,
            _ => ErrorClass::Numeric,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::Budget => 4,
            ErrorClass::Io => 5,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
