use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("mutation matrix outside K(H): {0}")]
    OutsideK(String),
    #[error("boundary input rejected: {0}")]
    Boundary(String),
    #[error("singular penultimate system (condition number {cond:.3e})")]
    Singular { cond: f64 },
    #[error("mutation rejection cap of {0} attempts exceeded")]
    RejectionCap(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty penultimate set")]
    EmptyPen,
    #[error("no feasible splice: {0}")]
    NoSplice(String),
    #[error("{0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
