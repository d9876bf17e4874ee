use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 16 nodes, got {0}")]
    GridTooSmall(usize),

    #[error("non-finite conformal factor at node {0}")]
    NonFinite(usize),

    #[error("field length {got} does not match grid size {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("volume {volume} is outside the normalized class (expected 4π)")]
    VolumeMismatch { volume: f64 },

    #[error("normalization integral {0} is not a positive finite number")]
    NormalizationFail(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("eigensolver failed for mode {mode}: {reason}")]
    SolveFail { mode: i32, reason: String },

    #[error("holomorphic band is ambiguous: {count} eigenvalues within {band_tol} of 1, gap {gap}")]
    BandAmbiguity { count: usize, band_tol: f64, gap: f64 },

    #[error("step rejected at t = {t}: relative volume drift {drift}")]
    StepReject { t: f64, drift: f64 },

    #[error("eigenvalue branch (m = {mode}, k = {index}) approaches a neighbour at t = {t}")]
    BranchCrossing { mode: i32, index: usize, t: f64 },

    #[error("flow failed at t = {t}: {source}")]
    AtTime { t: f64, source: Box<Error> },

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// The innermost error, with time annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn at(self, t: f64) -> Error {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime { t, source: Box::new(e) },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
