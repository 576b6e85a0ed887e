use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point set: {0}")]
    InvalidPoints(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model is not subcritical (spectral radius {0:.6} >= 1)")]
    NotSubcritical(f64),

    #[error("simulation exceeded the point cap of {cap}")]
    ExplodingProcess { cap: usize },

    #[error("evaluation at t={t} needs history back to {needed}, but the window starts at {start}")]
    WindowUnderflow { t: f64, needed: f64, start: f64 },

    #[error("window starts at {start}, design needs history from {needed}")]
    InsufficientHistory { needed: f64, start: f64 },

    #[error("model support {model} does not match dictionary support {dictionary}")]
    SupportMismatch { model: f64, dictionary: f64 },

    #[error("mu = {0} must satisfy 0 < mu < 3 and mu > exp(mu) - mu - 1")]
    BadMu(f64),

    #[error("bracket requires v > w > 0 (got v = {v}, w = {w})")]
    BadBracket { v: f64, w: f64 },

    #[error("Gram matrix is degenerate (smallest eigenvalue {0})")]
    DegenerateGram(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
