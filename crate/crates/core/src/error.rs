use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the approximation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain evaluation error: f({x}) = {value} is not finite")]
    DomainEvaluation { x: f64, value: f64 },

    #[error("unknown catalog function `{name}`; valid names: {valid}")]
    Catalog { name: String, valid: String },

    #[error("overflow evaluating log-MGF at lambda = {lambda}, x = {x}; restrict the x-domain or lower lambda")]
    Overflow { lambda: f64, x: f64 },

    #[error("weight undefined at x = {x}: {reason}")]
    WeightDomain { x: f64, reason: String },

    #[error("missing metadata: {0}")]
    MissingMetadata(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    /// A failure inside a per-n computation of a run.
    #[error("at n = {n}: {source}")]
    AtN { n: u64, source: Box<Error> },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Short machine-readable category used by the CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::DomainEvaluation { .. } => "domain-evaluation",
            Error::Catalog { .. } => "catalog",
            Error::Overflow { .. } => "overflow",
            Error::WeightDomain { .. } => "weight-domain",
            Error::MissingMetadata(_) => "missing-metadata",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Config(_) => "config",
            Error::AtN { source, .. } => source.kind(),
            Error::Io { .. } => "io",
        }
    }
}
