use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid divisor: {0}")]
    Divisor(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("{0}")]
    Hypothesis(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error("background: {0}")]
    Background(String),
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure at t = {t}: {msg}")]
    Numerical { t: f64, msg: String },
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("positivity violated at node {node}: R - s = {value}")]
    Positivity { node: usize, value: f64 },
    #[error("profile: {0}")]
    Profile(String),
    #[error("diagnostics: {0}")]
    Diagnostics(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
