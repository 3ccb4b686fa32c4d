use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("infeasible frame layout: {0}")]
    Layout(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("training aborted: {0}")]
    Training(String),

    #[error("bundle/config mismatch: {0}")]
    Mismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, printed on stderr by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Degenerate(_) => "degenerate",
            Error::Numerical(_) => "numerical",
            Error::Layout(_) => "layout",
            Error::Config { .. } => "config",
            Error::Training(_) => "training",
            Error::Mismatch(_) => "mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code associated with the category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Config { .. } => 3,
            Error::Mismatch(_) => 4,
            Error::Training(_) => 5,
            Error::Io(_) | Error::Json(_) => 6,
            _ => 1,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
