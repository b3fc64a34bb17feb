use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Clone, PartialEq, Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid spline configuration: {0}")]
    InvalidSpline(String),

    #[error("penalty order exceeds basis dimension (order {order}, dimension {dim})")]
    PenaltyOrder { order: usize, dim: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("measurement-error covariance unidentifiable without replicates")]
    NoReplicates,

    #[error("no subgroup of size >= 3; cannot estimate signal variance")]
    NoLargeGroup,

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),
}
