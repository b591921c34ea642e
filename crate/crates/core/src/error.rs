use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("inadmissible control (alpha={alpha}, gamma={gamma})")]
    InadmissibleAction { alpha: f64, gamma: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate transition law at x={x}: sigma*^2 + h*B* = 0")]
    DegenerateNode { x: f64 },

    #[error("invalid control set: {0}")]
    InvalidControlSet(String),

    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
