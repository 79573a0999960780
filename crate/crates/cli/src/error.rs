use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const SCHEMA: u8 = 3;
    pub const DATA: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] mcudi_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use mcudi_core::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) => match e {
                E::Config(_) => exit::USAGE,
                E::Schema(_) => exit::SCHEMA,
                E::EmptyInput(_)
                | E::InsufficientData(_)
                | E::DimensionMismatch { .. }
                | E::LengthMismatch { .. }
                | E::SingleClass(_)
                | E::Alignment(_)
                | E::MissingLabels(_)
                | E::Csv(_) => exit::DATA,
                E::Io(_) => exit::OTHER,
            },
            CliError::Io { .. } | CliError::Json(_) => exit::OTHER,
        }
    }
}
