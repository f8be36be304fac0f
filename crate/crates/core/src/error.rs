//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma pole at x = {0}")]
    GammaPole(f64),
    #[error("gamma overflow at x = {0}")]
    GammaOverflow(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite sample at node {node}: {value}")]
    NonFinite { node: usize, value: f64 },
    #[error("resolution exceeded: {0}")]
    Resolution(String),
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("positivity violated: eps must satisfy |eps| < {bound:.6e}")]
    Positivity { bound: f64 },
    #[error("missing multiplier entry ({k},{l})")]
    MissingEntry { k: u32, l: u32 },
    #[error("gamma pole hit in multiplier ({k},{l})")]
    MultiplierPole { k: u32, l: u32 },
    #[error("sign violation: {0}")]
    Sign(String),
    #[error("not evaluable: {0}")]
    NotEvaluable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("not of positive curvature: density {value:.3e} at node {node}")]
    Curvature { node: usize, value: f64 },
    #[error("aborted: {0}")]
    Aborted(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
