use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bounds error: {0}")]
    Bounds(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("undefined generalized gradient: point lies on the set")]
    UndefinedGradient,
    #[error("empty complex: grid function has no finite value")]
    EmptyComplex,
    #[error("validation error: {0}")]
    Validation(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("too many regions for subset enumeration ({0} > 8)")]
    SubsetExplosion(usize),
    #[error("resource guard: {0}")]
    ResourceGuard(String),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("fit unavailable: {0}")]
    FitUnavailable(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
