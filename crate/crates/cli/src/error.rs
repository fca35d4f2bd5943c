use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("column '{0}' not found in the data header")]
    MissingColumn(String),

    #[error("line {line}: duplicate record for subject '{subject}' at visit '{visit}'")]
    Duplicate { line: u64, subject: String, visit: String },

    #[error("line {line}: column '{column}' holds non-numeric value '{value}'")]
    NonNumeric { line: u64, column: String, value: String },

    #[error("line {line}: unknown visit label '{label}'")]
    UnknownVisit { line: u64, label: String },

    #[error("data: {0}")]
    Data(String),

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: skewmda::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

/// Tags a core error with the pipeline step that raised it.
pub(crate) trait StepContext<T> {
    fn step(self, step: &'static str) -> Result<T>;
}

impl<T> StepContext<T> for skewmda::Result<T> {
    fn step(self, step: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Step { step, source })
    }
}
