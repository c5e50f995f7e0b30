use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range (e.g. `sigma`, `b`, `r`).
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// An argument fell outside the domain of a function.
    #[error("argument {value} outside domain [{lower}, {upper}]")]
    Range { value: f64, lower: f64, upper: f64 },

    /// A model returned a non-finite or otherwise unusable value.
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
