use thiserror::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<optopiston::ObservableError> for CliError {
    fn from(e: optopiston::ObservableError) -> Self {
        use optopiston::ObservableError as E;
        match e {
            E::Model(m) => CliError::Validation(m.to_string()),
            E::InvalidLoad(_) | E::EmptyGrid | E::InvalidMode { .. } => CliError::Validation(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<optopiston::ClassicalError> for CliError {
    fn from(e: optopiston::ClassicalError) -> Self {
        use optopiston::ClassicalError as E;
        match e {
            E::BlowUp { .. } | E::TooManyAborted { .. } | E::NonFinite | E::EmptyEnsemble => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<optopiston::SolverError> for CliError {
    fn from(e: optopiston::SolverError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<optopiston::ModelError> for CliError {
    fn from(e: optopiston::ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}
