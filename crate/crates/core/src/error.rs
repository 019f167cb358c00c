use thiserror::Error;

use crate::sim::{AchievedRates, TransitionModel};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The test variance is zero (or there are no events), so no p-value exists.
    #[error("degenerate test: {0}")]
    DegenerateTest(&'static str),

    #[error(
        "calibration did not converge: best model reached CR {:.4} / PR {:.4}",
        .0.achieved.cr_rate,
        .0.achieved.pr_rate
    )]
    CalibrationFailure(Box<CalibrationFailure>),

    #[error("target power {target} is never reached on the grid (max achieved {max_power:.4})")]
    OutOfRange { target: f64, max_power: f64 },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Best model found when calibration runs out of budget.
#[derive(Debug, Clone)]
pub struct CalibrationFailure {
    pub model: TransitionModel,
    pub achieved: AchievedRates,
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
