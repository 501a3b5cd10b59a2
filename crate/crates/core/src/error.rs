use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("normalization channel {channel} is degenerate (scale {scale:e} below 1e-12)")]
    DegenerateChannel { channel: usize, scale: f64 },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("unsupported checkpoint version: expected magic \"BFDN1\", found {0:?}")]
    CheckpointVersion(String),

    #[error("checkpoint payload length mismatch in layer `{layer}`: expected {expected} floats, found {found}")]
    CheckpointLength {
        layer: String,
        expected: usize,
        found: usize,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("pgm: {0}")]
    Pgm(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
