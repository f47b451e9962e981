use slowfast_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures of the implicit solve or blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::NewtonDivergence { .. } | CoreError::NonFinite(_)) => 3,
            _ => 2,
        }
    }
}
