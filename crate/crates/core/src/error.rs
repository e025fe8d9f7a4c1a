use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("degenerate surface: mesh has zero total area")]
    DegenerateSurface,
    #[error("zero extent: all points coincide")]
    ZeroExtent,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("points per primitive: {points} points cannot be split across {primitives} primitives")]
    PointsPerPrimitive { points: usize, primitives: usize },
    #[error("backward without recorded forward")]
    NoRecordedForward,
    #[error("empty batch")]
    EmptyBatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("missing loss term {0}")]
    MissingTerm(&'static str),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("invalid domain tag {0}, expected 1 or 2")]
    InvalidDomain(u8),
    #[error("same-domain translation: source and destination are both {0}")]
    SameDomainTranslation(u8),
    #[error("model is not multimodal")]
    NotMultimodal,
    #[error("weak extractor: held-out accuracy {accuracy:.3} below {floor:.3}")]
    WeakExtractor { accuracy: f64, floor: f64 },
    #[error("dataset needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("empty family {0}")]
    EmptyFamily(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not a checkpoint")]
    NotACheckpoint,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence(_) => 3,
            Error::SameDomainTranslation(_) | Error::InvalidDomain(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }
}
