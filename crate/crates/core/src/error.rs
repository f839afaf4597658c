use thiserror::Error;

/// Errors raised by state construction, channel application and the protocol runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid subsystem layout: {0}")]
    InvalidLayout(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("layout mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("channel is not complete (residual {residual:.3e})")]
    IncompleteChannel { residual: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("rank {rank} out of range 1..={dim}")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("every measurement outcome is degenerate")]
    AllOutcomesDegenerate,

    #[error("outcome index {index} out of range for {count} Kraus operators")]
    OutcomeOutOfRange { index: usize, count: usize },

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("invalid block measurement: {0}")]
    InvalidMeasurement(String),

    #[error("blocks have unequal ranks {0:?}")]
    UnequalRanks(Vec<usize>),

    #[error("plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
