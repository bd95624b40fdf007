use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Infeasible(String),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Clap(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<sparsevary::Error> for CliError {
    fn from(e: sparsevary::Error) -> Self {
        use sparsevary::Error as E;
        let text = e.to_string();
        match e {
            E::Io(_) | E::Csv(_) | E::Parse { .. } | E::Dimension(_) | E::Graph(_) => CliError::Io(text),
            E::Parameter(_) | E::Generation(_) => CliError::Usage(text),
            E::InfeasibleWarmStart => CliError::Infeasible(text),
            _ => CliError::Internal(text),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
