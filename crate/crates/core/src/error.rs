use thiserror::Error;

/// Errors surfaced by the estimation library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate exchange round: {0}")]
    DegenerateRound(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("singular geometry: {0}")]
    SingularGeometry(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("all mixture weights vanished")]
    DegenerateWeights,
    #[error("invalid filter state: {0}")]
    InvalidState(String),
    #[error("training diverged: {0}")]
    TrainingDiverged(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
