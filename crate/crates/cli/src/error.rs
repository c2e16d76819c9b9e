use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const IO: i32 = 5;
    pub const SELFCHECK: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    /// A failure inside the library, qualified by stock and stage.
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: confuse_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("selfcheck failed")]
    SelfcheckFailed,
}

impl From<confuse_core::Error> for CliError {
    fn from(e: confuse_core::Error) -> Self {
        match e {
            confuse_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Core {
                context: "confuse".into(),
                source: other,
            },
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: confuse_core::Error) -> Self {
        match source {
            confuse_core::Error::Config(m) => CliError::Config(format!("{}: {m}", context.into())),
            source => CliError::Core {
                context: context.into(),
                source,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        use confuse_core::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::SelfcheckFailed => exit::SELFCHECK,
            CliError::Core { source, .. } => match source {
                e if e.is_numerical() => exit::NUMERICAL,
                E::Config(_) => exit::CONFIG,
                E::Io(_) | E::File { .. } => exit::IO,
                _ => exit::DATA,
            },
        }
    }
}
