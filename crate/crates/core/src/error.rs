use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("blow-up detected at t = {t} (component {component}): {detail}")]
    BlowUp {
        t: f64,
        component: usize,
        detail: String,
    },

    #[error(
        "X equation not contractive: measured factor {factor:.4} >= 1 at L = {level}; increase L"
    )]
    NotContractive { factor: f64, level: i32 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable machine-readable kind used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NonFinite(_) => "non_finite",
            Error::BlowUp { .. } => "blow_up",
            Error::NotContractive { .. } => "not_contractive",
            Error::Config { .. } => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
