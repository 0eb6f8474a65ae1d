use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point ({x}, {y}) is outside the open first quadrant")]
    Domain { x: f64, y: f64 },

    #[error("time {t} lies beyond the existence interval (t_max = {t_max})")]
    BeyondExistence { t: f64, t_max: f64 },

    #[error("operation requires the {expected} flow")]
    KindMismatch { expected: &'static str },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
