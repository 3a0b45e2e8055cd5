use thiserror::Error;

/// Errors raised by the electro-sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dictionary shape: {0}")]
    UnknownShape(String),

    #[error("insufficient resolution: {panels} panels (need at least {min})")]
    InsufficientResolution { panels: usize, min: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid rigid motion: scale must be positive, got {0}")]
    InvalidMotion(f64),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("near-singular evaluation: target at distance {distance:.3e} from the boundary (panel size {panel:.3e})")]
    NearSingularEvaluation { distance: f64, panel: f64 },

    #[error("evaluation at a source point: distance {0:.3e}")]
    SourcePointEvaluation(f64),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("spectral decomposition failed: {0}")]
    SpectralFailure(String),

    #[error("geometry collision: {0}")]
    GeometryCollision(String),

    #[error("acquisition geometry does not resolve the PT (rank {rank} < 3)")]
    RankDeficient { rank: usize },

    #[error("degenerate normalizer: scale-0 energy is {0:e}")]
    DegenerateNormalizer(f64),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
