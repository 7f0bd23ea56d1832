use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] fetmosaic::Error),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    /// 2 for invalid flags or inputs that can never succeed, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use fetmosaic::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                E::InvalidConfig(_)
                | E::TooFewFrames { .. }
                | E::SizeTooSmall(_)
                | E::ImageTooSmall { .. }
                | E::IndexOutOfRange { .. },
            ) => 2,
            _ => 1,
        }
    }
}
