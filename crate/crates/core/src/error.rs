use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("observation stream for episode {0} is empty")]
    EmptyStream(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("entries out of order: {0}")]
    Unsorted(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time {t} outside the monitored range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("need at least {needed} subjects for {needed}-fold split, found {found}")]
    TooFewGroups { needed: usize, found: usize },

    #[error("metric requires both classes, found only {0}")]
    SingleClass(&'static str),

    #[error("true hazard {rate} exceeds declared bound {bound} at t={t}")]
    RateBoundViolated { rate: f64, bound: f64, t: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyStream(_) => "EmptyStream",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::UnknownFeature(_) => "UnknownFeature",
            Error::Unsorted(_) => "Unsorted",
            Error::DegenerateData(_) => "DegenerateData",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::TooFewGroups { .. } => "TooFewGroups",
            Error::SingleClass(_) => "SingleClass",
            Error::RateBoundViolated { .. } => "RateBoundViolated",
            Error::Parse(_) => "Parse",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::Io(_) => "Io",
        }
    }

    /// True when the failure comes from the data itself rather than from
    /// malformed input (no events, zero exposure, a violated rate bound).
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData(_) | Error::SingleClass(_) | Error::RateBoundViolated { .. }
        )
    }
}
