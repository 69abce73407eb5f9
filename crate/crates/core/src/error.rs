use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid accuracy table: {0}")]
    Table(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("iteration cap of {cap} sweeps exceeded ({swaps} swaps accepted)")]
    IterationCap { cap: usize, swaps: usize },

    #[error("instance too large for exhaustive search: {leaves} leaves exceeds cap {cap}")]
    TooLarge { leaves: u128, cap: u128 },

    #[error("replay diverged: {0}")]
    Replay(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user-supplied input rather than a failure
    /// while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Table(_) | Error::Json(_) | Error::Domain(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
