use thiserror::Error;

/// Failures grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<fdclust::Error> for CliError {
    fn from(e: fdclust::Error) -> Self {
        use fdclust::Error::*;
        match e {
            InvalidGrid(_) | Dimension(_) | NoReplicates | NoLargeGroup | PartitionMismatch(_) => {
                CliError::Data(e.to_string())
            }
            InvalidSpline(_) | PenaltyOrder { .. } | InvalidParameter(_) => CliError::Usage(e.to_string()),
            Singular(_) => CliError::Numerical(e.to_string()),
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
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
