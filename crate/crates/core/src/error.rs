use thiserror::Error;

/// Errors raised by the estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A malformed argument (bad sizes, degenerate intervals, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numerical procedure failed to meet its accuracy contract.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("requested polynomial degree {requested} exceeds the cap {cap}")]
    DegreeCap { requested: usize, cap: usize },

    #[error("orthonormality defect {defect:.3e} at degree {degree} exceeds tolerance")]
    Instability { degree: usize, defect: f64 },

    #[error("sample has zero dispersion")]
    DegenerateSample,

    #[error("load error at line {line}: {message}")]
    Load { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
