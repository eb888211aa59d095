use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("degenerate measure pair: mu equals nu")]
    DegeneratePair,
    #[error("label {label} outside alphabet of size {size}")]
    LabelOutOfRange { label: usize, size: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid walk specification: {0}")]
    InvalidWalk(String),
    #[error("walk exceeded step budget of {0} steps before its stop rule fired")]
    StepBudgetExceeded(u64),
    #[error("coordinate overflow")]
    CoordinateOverflow,
    #[error("path is not oriented: {0}")]
    NotOriented(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("detector not applicable: {0}")]
    Inapplicable(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("scenery format error: {0}")]
    Format(String),
    #[error("trial failed (arm {arm}, index {index}, stream seed {seed:#018x}): {source}")]
    Trial {
        arm: String,
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Config-class errors map to CLI exit code 2, everything else to 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidMeasure(_)
                | Error::InvalidParameter(_)
                | Error::InvalidWalk(_)
                | Error::InvalidTree(_)
                | Error::InvalidFlow(_)
                | Error::DegeneratePair
                | Error::Inapplicable(_)
        )
    }
}
