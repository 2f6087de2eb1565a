use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("empty concept class")]
    EmptyClass,

    #[error("point {point} is outside a domain of size {domain_size}")]
    PointOutOfDomain { point: usize, domain_size: usize },

    #[error("domain size mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("concept class contains a duplicate hypothesis")]
    DuplicateMember,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("samples are not neighbors: {0}")]
    NotNeighbors(String),

    /// A property that must hold on every run was observed to fail.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("refusing intractable run: {0}")]
    Intractable(String),

    #[error("unknown report format {0:?} (expected csv or json)")]
    UnknownFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
