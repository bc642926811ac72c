use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter vector violates its model invariants or lies outside the box.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// The M-step cannot be evaluated on this statistic (zero row, non-positive variance).
    #[error("degenerate sufficient statistic: {0}")]
    DegenerateStatistic(String),

    /// A filter normalizing constant vanished or became non-finite.
    #[error("normalizing constant vanished at step {step}")]
    Underflow { step: usize },

    /// Every particle weight is zero after reweighting.
    #[error("particle weights degenerate at step {step}")]
    ParticleDegeneracy { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} points for a regression, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("csv: {0}")]
    CsvFormat(String),

    #[error("checkpoint grids differ: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
