use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported dimension d = {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("quadrature tolerance not met for {what} (achieved relative error {achieved:e})")]
    Quadrature { what: String, achieved: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("missing certificate: {0}")]
    MissingCertificate(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
