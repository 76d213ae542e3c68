use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), key.as_ref().map(|k| format!(" [{k}]")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
    #[error("{0}")]
    Core(#[from] sspd_core::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} oracle checks failed")]
    OracleFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn config(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> Self {
        Self::Config {
            line,
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for invalid input, 3 for numerical failures, 4 for I/O, 1 when
    /// oracle checks ran but disagreed.
    pub fn exit_code(&self) -> i32 {
        use sspd_core::Error as E;
        match self {
            Self::Config { .. } => 2,
            Self::Core(E::Io(_)) | Self::Io { .. } => 4,
            Self::Core(
                E::Parse { .. } | E::InvalidParameter(_) | E::InvalidDispersion(_) | E::WavelengthOutOfRange { .. },
            ) => 2,
            Self::Core(E::SweepPoint { source, .. }) if matches!(**source, E::WavelengthOutOfRange { .. }) => 2,
            Self::Core(_) => 3,
            Self::OracleFailed { .. } => 1,
        }
    }
}
