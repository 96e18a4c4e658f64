use thiserror::Error;

/// Location of a bad cell, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRef {
    pub column: usize,
    pub name: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: line {line}{}: {message}", .column.as_ref().map(|c| format!(", column {} ({})", c.column, c.name)).unwrap_or_default())]
    Parse {
        path: String,
        line: usize,
        column: Option<CellRef>,
        message: String,
    },
    #[error("{0} is not supported for model {1}")]
    Unsupported(String, String),
    #[error(transparent)]
    Model(#[from] bayeskern::Error),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Machine-readable code printed with every failure.
    pub fn code(&self) -> String {
        match self {
            CliError::Io { .. } => "io".into(),
            CliError::Config(_) => "config".into(),
            CliError::Parse { .. } => "parse".into(),
            CliError::Unsupported(..) => "unsupported".into(),
            CliError::Model(e) => format!("model.{}", e.code()),
        }
    }

    pub fn exit_status(&self) -> i32 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Config(_) | CliError::Unsupported(..) => 4,
            CliError::Parse { .. } => 5,
            CliError::Model(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
