use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficient design: smallest pivot {min_pivot:e}, largest {max_pivot:e}")]
    RankDeficient { min_pivot: f64, max_pivot: f64 },

    #[error("induced subgraph keeps {kept} nodes, at least {required} required")]
    EmptySubgraph { kept: usize, required: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidConfig(_)
            | Error::Format(_) => 2,
            Error::RankDeficient { .. } | Error::EmptySubgraph { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }

    /// True for failures of the numerics (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::RankDeficient { .. } | Error::EmptySubgraph { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
