use qsoliton_fock::OracleError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical abort at t = {t}: {reason}")]
    Abort { t: f64, reason: String },

    /// An oracle comparison left its tolerance inside the controlled window.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Abort { .. } => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

impl From<qsoliton_core::Error> for CliError {
    fn from(e: qsoliton_core::Error) -> Self {
        use qsoliton_core::Error as E;
        match e {
            E::Config(msg) => CliError::Config(msg),
            E::NumericalAbort { t, reason } => CliError::Abort { t, reason },
            E::Io(io) => CliError::Io(io),
            other @ (E::Contract(_) | E::Snapshot(_)) => CliError::Internal(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Config(msg) => CliError::Config(msg),
            OracleError::Abort { t, reason } => CliError::Abort { t, reason },
        }
    }
}
