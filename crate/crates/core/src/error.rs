use alloc::string::String;

/// Errors raised by model construction and the algorithms in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("dataset does not match the model shape: {0}")]
    ShapeMismatch(String),

    #[error("dataset too small: {k} trajectories cannot be split across {horizon} steps")]
    DatasetTooSmall { k: usize, horizon: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
