use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trajectory has {got} steps but the horizon is {expected}")]
    TrajectoryLength { expected: usize, got: usize },

    #[error("enumeration infeasible: more than {cap} nodes")]
    EnumerationInfeasible { cap: usize },

    #[error("coverage of pi* requires a deterministic policy")]
    StochasticPolicy,

    #[error("state {0} outside the state space")]
    StateOutOfRange(usize),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("no generalization target: no stored prefix ends in state {0}")]
    NoGeneralizationTarget(usize),

    #[error("unmodeled state {0}")]
    UnmodeledState(usize),

    #[error("unmodeled state-action pair ({0}, {1})")]
    UnmodeledPair(usize, usize),

    #[error("no improvement discoverable: 0 rollouts beat g_max = {g_max} in {attempts} attempts")]
    NoImprovement { g_max: f64, attempts: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
