use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },
    #[error("missing required argument {0}")]
    MissingArgument(&'static str),
    #[error("unknown {kind} `{name}`; known: {known}")]
    UnknownName { kind: &'static str, name: String, known: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{module}: {message}")]
    Library { module: &'static str, message: String },
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "E_IO",
            CliError::Parse { .. } => "E_PARSE",
            CliError::MissingArgument(_) => "E_MISSING_ARGUMENT",
            CliError::UnknownName { .. } => "E_UNKNOWN_NAME",
            CliError::Invalid(_) => "E_INVALID_INPUT",
            CliError::Library { .. } => "E_COMPUTATION",
            CliError::CheckFailed(_) => "E_CHECK_FAILED",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Io { .. } => 3,
            CliError::Parse { .. }
            | CliError::MissingArgument(_)
            | CliError::UnknownName { .. }
            | CliError::Invalid(_) => 4,
            CliError::Library { .. } => 5,
        }
    }

    pub fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        CliError::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}

macro_rules! library_error {
    ($($ty:path => $module:literal),* $(,)?) => {
        $(
            impl From<$ty> for CliError {
                fn from(e: $ty) -> Self {
                    CliError::Library { module: $module, message: e.to_string() }
                }
            }
        )*
    };
}

library_error!(
    chaincalc::chain::ChainError => "chain",
    chaincalc::multivector::MultivectorError => "multivector",
    chaincalc::form::FormError => "form",
    chaincalc::norm::NormError => "norm",
    chaincalc::domains::DomainError => "domains",
    chaincalc::complex::ComplexError => "complex",
    chaincalc::dynamics::DynamicsError => "dynamics",
);

pub type Result<T> = std::result::Result<T, CliError>;
