use std::path::PathBuf;

use gridtwin::ErrorFamily;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gridtwin::Error),

    #[error("{0}")]
    Usage(String),

    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_INTEGRITY: i32 = 4;
pub const EXIT_UNOBSERVABLE: i32 = 5;
pub const EXIT_NUMERIC: i32 = 6;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config { .. } => EXIT_PARSE,
            CliError::Core(e) => match e.family() {
                ErrorFamily::Io => EXIT_IO,
                ErrorFamily::Parse => EXIT_PARSE,
                ErrorFamily::Integrity => EXIT_INTEGRITY,
                ErrorFamily::Unobservable => EXIT_UNOBSERVABLE,
                ErrorFamily::Numeric => EXIT_NUMERIC,
            },
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |e| CliError::Core(gridtwin::Error::io(path, e))
}
