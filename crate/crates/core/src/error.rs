use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: dimension mismatch, out-of-range index, unsupported option.
    #[error("usage error: {0}")]
    Usage(String),

    /// A run configuration or parameter set failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// The vector field produced a non-finite value or hit a singularity.
    #[error("model evaluation failed at state {state:?}: {reason}")]
    Model { state: Vec<f64>, reason: String },

    /// A model failure raised while updating a specific grid node.
    #[error("at grid node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed field, mask or CSV file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit code: 2 for usage, config and input problems, 3 for model failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model { .. } => 3,
            Error::AtNode { source, .. } => source.exit_code(),
            Error::Usage(_) | Error::Config(_) | Error::Format(_) | Error::Io(_) => 2,
        }
    }
}
