use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A node without any positive incident weight.
    #[error("node {node} is isolated (no incident edge with positive weight)")]
    IsolatedNode { node: usize },

    /// Column sum of the assignment matrix fell below the degeneracy threshold.
    #[error("cluster {cluster} is degenerate: column sum {column_sum:e}")]
    DegenerateCluster { cluster: usize, column_sum: f64 },

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("eigensolver failed to converge: {0}")]
    EigenSolver(String),

    #[error("all {} initialization candidates failed: {}", reasons.len(), reasons.join("; "))]
    AllCandidatesFailed { reasons: Vec<String> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
