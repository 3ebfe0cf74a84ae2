use thiserror::Error;

/// Errors raised by the measure, sampling, integration and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("control measure diverges on the requested region: {0}")]
    DivergentControlMeasure(String),

    #[error("Lévy symbol integral diverges: {0}")]
    SymbolDivergent(String),

    #[error("density undefined at {point:?}: control measure has no mass there")]
    UndefinedDensity { point: Vec<f64> },

    #[error("function is not integrable against the random measure: {0}")]
    NotIntegrable(String),

    #[error("infinite jump activity above truncation ε = {eps}: {guidance}")]
    InfiniteActivity { eps: f64, guidance: String },

    #[error("region lies outside the sampled window: {0}")]
    OutOfWindow(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
