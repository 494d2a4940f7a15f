use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    /// An argument lies outside the domain of the operation (non-finite input, empty set).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The request would exceed a hard size guard.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    /// Non-finite weights appeared during training.
    #[error("divergence at step {step}: {message}")]
    Divergence { step: usize, message: String },

    #[error("numeric failure (residual {residual:e}): {message}")]
    Numeric { residual: f64, message: String },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        LabError::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    /// Wraps the error with experiment coordinates, keeping its variant.
    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            LabError::Divergence { step, message } => LabError::Divergence {
                step,
                message: format!("{ctx}: {message}"),
            },
            LabError::Numeric { residual, message } => LabError::Numeric {
                residual,
                message: format!("{ctx}: {message}"),
            },
            LabError::Config(m) => LabError::Config(format!("{ctx}: {m}")),
            LabError::Domain(m) => LabError::Domain(format!("{ctx}: {m}")),
            other => other,
        }
    }
}
