use phonokit::corpus::CorpusError;
use phonokit::evaluation::EvalError;
use phonokit::selection::SelectionError;
use phonokit::synth::SynthError;
use thiserror::Error;

/// Failures surfaced to the shell. Validation errors exit with 2, data
/// errors with 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::MissingColumn(_)
            | CorpusError::UnknownGroupLabel { .. }
            | CorpusError::DuplicateRecordingPath { .. }
            | CorpusError::InvalidField { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(_) => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::AliasingRisk { .. } | SynthError::InvalidParams(_) => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
