use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("mesh has no faces with positive area")]
    EmptyMesh,
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("linear system is numerically singular")]
    SingularSolve,
    #[error("gains must be strictly positive")]
    NonPositiveGains,
    #[error("no correspondences within {0} m")]
    NoCorrespondences(f64),
    #[error("mesh volume is not positive ({0})")]
    NonPositiveVolume(f64),
    #[error("could not separate initial and goal poses after {0} attempts")]
    WorkspaceTooSmall(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated record {0}")]
    TruncatedRecord(u64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}
