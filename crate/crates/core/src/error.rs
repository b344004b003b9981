use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("mesh `{0}` has no usable triangles")]
    EmptyMesh(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sdf resolution {0} outside [16, 512]")]
    ResolutionOutOfRange(usize),

    #[error("point {0:?} is not strictly inside the sdf grid")]
    PointOnGridBoundary([f64; 3]),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("explosion needs at least two parts, got {0}")]
    SinglePart(usize),

    #[error("zero total volume")]
    ZeroVolume,

    #[error("annotation client unavailable: {0}")]
    ClientUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
