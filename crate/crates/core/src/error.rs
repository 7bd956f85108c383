use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected input parameters (grid sizes, filter transmittance, step sizes).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (wrong domain, shape mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Integration produced an unphysical or non-finite state.
    #[error("numerical abort at t = {t}: {reason}")]
    NumericalAbort { t: f64, reason: String },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
