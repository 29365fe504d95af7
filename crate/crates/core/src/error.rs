use thiserror::Error;

/// Errors raised by the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid model: {0}")]
    InvalidModel(String),

    #[error("invalid scenario set: {0}")]
    InvalidScenarios(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adoption probability {prob} outside [0, 1] at step {step}")]
    ProbabilityOutOfRange { step: usize, prob: f64 },

    #[error("missing base timeseries: {0}")]
    MissingTimeseries(String),

    #[error("problem construction: {0}")]
    Problem(String),

    #[error("solver returned {status}: {context}")]
    Solve { status: String, context: String },

    #[error("plan extraction: {0}")]
    Extraction(String),

    #[error("every budget is infeasible; the minimum secure investment cost is {min_cost:.6}")]
    AllBudgetsInfeasible { min_cost: f64 },

    #[error("power flow: {0}")]
    PowerFlow(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
