use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not unimodular: ad - bc = {0}")]
    NonUnimodular(f64),
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("b = 0: chirp-multiplication branch is not valid here")]
    BZero,
    #[error("degenerate matrix: b = 0 and d = 0")]
    DegenerateMatrix,
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("width must be positive, got {0}")]
    BadWidth(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shift {0} is not an integer multiple of the sample spacing")]
    OffGridShift(f64),
    #[error("undersampled chirp: phase advances {0:.3} rad per sample (limit pi)")]
    Undersampled(f64),
    #[error("signal energy is zero")]
    ZeroEnergy,
    #[error("local energy Q(t) vanishes at t = {0}")]
    ZeroLocalEnergy(f64),
    #[error("local spectral energy P(u) vanishes at u = {0}")]
    ZeroSpectralEnergy(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Parse and configuration failures, as opposed to numerical ones.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::NonUnimodular(_)
                | Error::NonFinite
                | Error::BadGrid(_)
                | Error::BadWidth(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::GridMismatch(_)
                | Error::OffGridShift(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
