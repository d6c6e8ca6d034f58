use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("map spec not found: {0}")]
    MapNotFound(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("unsupported map: {0}")]
    UnsupportedMap(String),
    #[error("row {row} sums to {sum}, which does not contain 1")]
    NotStochastic { row: usize, sum: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("contraction not certified within {n_max} steps; best bound {best}")]
    CertificationFailed { n_max: usize, best: f64 },
    #[error("no spectral gap certified: rho* = {0}")]
    NoSpectralGap(f64),
    #[error("fixed-point iteration did not converge: residual {0}")]
    NotConverged(f64),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cache file error: {0}")]
    Cache(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable identifier of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInterval { .. } => "invalid_interval",
            Error::DivisionByZero => "division_by_zero",
            Error::Domain(_) => "domain",
            Error::Parse(_) => "parse",
            Error::MapNotFound(_) => "map_not_found",
            Error::InvalidMap(_) => "invalid_map",
            Error::UnsupportedMap(_) => "unsupported_map",
            Error::NotStochastic { .. } => "not_stochastic",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CertificationFailed { .. } => "certification_failed",
            Error::NoSpectralGap(_) => "no_spectral_gap",
            Error::NotConverged(_) => "not_converged",
            Error::PrecisionExhausted(_) => "precision_exhausted",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Cache(_) => "cache",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }

    /// Errors caused by bad user input rather than a failed certification.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::MapNotFound(_)
                | Error::InvalidMap(_)
                | Error::UnsupportedMap(_)
                | Error::InvalidMesh(_)
                | Error::InvalidArgument(_)
        )
    }
}
