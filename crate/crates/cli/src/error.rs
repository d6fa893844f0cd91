use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        })
    }
}

impl From<freqmux::Error> for CliError {
    fn from(e: freqmux::Error) -> Self {
        use freqmux::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter { .. } | E::NonFinite(_) | E::UnknownMode { .. } | E::OutOfRange { .. } => {
                CliError::Config(msg)
            }
            E::Io(_) | E::Csv(_) | E::Format(_) | E::Unsorted { .. } => CliError::Io(msg),
            _ => CliError::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
