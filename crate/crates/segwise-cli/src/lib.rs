//! Command-line front end: CSV ingestion, argument parsing and result
//! emission for the detection library.

pub mod args;
pub mod ingest;
pub mod output;
pub mod run;

/// Exit code classification: data problems exit 1, configuration problems
/// exit 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Data(String),
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    /// Single-line machine-parsable rendering for the diagnostic stream.
    pub fn render(&self) -> String {
        match self {
            CliError::Data(msg) => format!("error: data: {msg}"),
            CliError::Config(msg) => format!("error: config: {msg}"),
        }
    }
}

impl From<segwise::Error> for CliError {
    fn from(e: segwise::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
