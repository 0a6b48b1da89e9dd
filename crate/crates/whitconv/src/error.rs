use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole of the gamma function at z = {0}")]
    GammaPole(f64),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("tail estimate failed: {0}")]
    TailEstimate(String),
    #[error("grid does not cover enough mass: {0}")]
    Coverage(String),
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("cost cap exceeded: {0}")]
    CostCap(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("scheme instability: {0}")]
    Instability(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam(_) | Error::Domain(_) | Error::Parse(_) | Error::GammaPole(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
