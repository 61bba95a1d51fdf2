use std::path::PathBuf;

/// Errors raised by the registration stages and the file readers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty cloud")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("normal {index} is not unit length (norm {norm})")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("normals length {normals} does not match points length {points}")]
    NormalsLength { points: usize, normals: usize },
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate neighborhood")]
    DegenerateNeighborhood,
    #[error("coincident points")]
    CoincidentPair,
    #[error("coincident points {0} and {1}")]
    CoincidentPoints(usize, usize),
    #[error("no reliable points")]
    NoReliablePoints,
    #[error("empty descriptor set")]
    EmptyDescriptors,
    #[error("descriptor dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("insufficient support: {0} positive weights, need at least 3")]
    InsufficientSupport(usize),
    #[error("rank-deficient point configuration")]
    RankDeficient,
    #[error("solver degenerate: {0}")]
    SolverDegenerate(String),
    #[error("pruning rejected all correspondences")]
    PruningRejectedAll,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
