use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A query distribution could not produce the requested keys, or a query
    /// set overlaps the stored key set.
    #[error("workload error: {0}")]
    Workload(String),

    #[error("training failed at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    /// Serialized data did not decode.
    #[error("malformed input: {0}")]
    Format(String),

    /// The exact enumeration oracle cannot run on this distribution; callers
    /// should fall back to sampling.
    #[error("exact oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
