use thiserror::Error;

/// Errors produced by estimation, simulation and bootstrap routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular design: column {column} is numerically collinear with the others")]
    SingularDesign { column: usize },

    #[error("degenerate residual covariance: {0}")]
    DegenerateCovariance(String),

    #[error("non-stationary specification: companion spectral radius {radius:.6} >= 1")]
    NonStationary { radius: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("irrelevant instrument: {0}")]
    IrrelevantInstrument(String),

    #[error("identification missing: {0}")]
    IdentificationMissing(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-PSD input: {0}")]
    NotPositiveSemidefinite(String),

    #[error("too many failed draws: {failed} of {total} (limit {limit_pct}%)")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit_pct: f64,
    },

    #[error("missing horizon {horizon} in series `{series}`")]
    MissingHorizon { series: String, horizon: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable category used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InsufficientData(_) => "insufficient-data",
            Error::SingularDesign { .. } => "singular-design",
            Error::DegenerateCovariance(_) => "degenerate-covariance",
            Error::NonStationary { .. } => "non-stationary",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::IrrelevantInstrument(_) => "irrelevant-instrument",
            Error::IdentificationMissing(_) => "identification-missing",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::NotPositiveSemidefinite(_) => "non-psd",
            Error::TooManyFailures { .. } => "too-many-failures",
            Error::MissingHorizon { .. } => "missing-horizon",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
