use crate::config::SchemaError;
use spinfactory::design::DesignError;
use spinfactory::entanglement::EntanglementError;
use spinfactory::quantum::QuantumError;
use spinfactory::recipes::RecipeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input, 2 when the numbers fail a consistency check.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<QuantumError> for CliError {
    fn from(e: QuantumError) -> Self {
        match e {
            QuantumError::NotFactorized(_) | QuantumError::NoCrossing(_) => Self::Numerical(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::InvalidInput(_) => Self::Validation(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<EntanglementError> for CliError {
    fn from(e: EntanglementError) -> Self {
        match e {
            EntanglementError::Quantum(q) => q.into(),
            EntanglementError::DegenerateGS(_) | EntanglementError::Numerical(_) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<RecipeError> for CliError {
    fn from(e: RecipeError) -> Self {
        match e {
            RecipeError::Design(d) => d.into(),
            _ => Self::Validation(e.to_string()),
        }
    }
}
