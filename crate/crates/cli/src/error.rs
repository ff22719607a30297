use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const ACCEPTANCE: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Core(#[from] mollify_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Parameter-type core errors stem from the config; the rest are bugs
    /// or numerical failures.
    pub fn exit_code(&self) -> i32 {
        use mollify_core::Error as E;
        match self {
            CliError::Validation { .. } => exit::VALIDATION,
            CliError::Core(E::Parameter { .. } | E::Resolution { .. } | E::UnsupportedKernel { .. }) => {
                exit::VALIDATION
            }
            CliError::Core(_) | CliError::Io { .. } | CliError::Internal(_) => exit::INTERNAL,
        }
    }
}
