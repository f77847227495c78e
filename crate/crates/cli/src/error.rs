use ismq_core::antichain::BuildError;
use ismq_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("resource cap: {0}")]
    Cap(String),
    #[error("invariant `{check}` failed: {detail}")]
    Invariant { check: String, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Invariant { .. } => 3,
            CliError::Cap(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::CapExceeded { .. } | BuildError::TooDeep { .. } => {
                CliError::Cap(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Build(b) => b.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

macro_rules! numeric_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numeric(e.to_string())
            }
        }
    )*};
}

numeric_from!(
    ismq_core::dims::DimsError,
    ismq_core::quantizer::QuantError,
    ismq_core::model::ModelError,
    ismq_core::words::WordError
);
