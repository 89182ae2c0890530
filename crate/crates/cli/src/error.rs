use ruin_core::RuinError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("compute error in {context}: {source}")]
    Compute { context: String, source: RuinError },
    #[error("output error: {0}")]
    Output(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Config(_) => 2,
            Self::Compute { .. } | Self::Output(_) => 3,
        }
    }
}

/// Attaches the operation and its arguments to a core error.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for ruin_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Compute { context: what(), source })
    }
}
