use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subspaces have unequal dimensions ({0} vs {1})")]
    UnequalDims(usize, usize),

    #[error("frame is not orthonormal (Gram deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("rank deficient: needed {needed} independent directions, found {got}")]
    RankDeficient { needed: usize, got: usize },

    #[error("degenerate pair: largest Morgan angle {0} is within 1e-8 of pi/2")]
    DegeneratePair(f64),

    #[error("rank of L1 - L2 is {0}, expected 2")]
    RankMismatch(usize),

    #[error("linear map is zero")]
    ZeroMap,

    #[error("linear map is degenerate (smallest singular value {0:e})")]
    DegenerateMap(f64),

    #[error("operation needs at least two planes")]
    SinglePlane,

    #[error("pruning hypothesis violated: D = {d} exceeds eps * max gap = {bound}")]
    HypothesisViolated { d: f64, bound: f64 },

    #[error("invalid gap matrix: {0}")]
    InvalidGapMatrix(String),

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("invalid current: {0}")]
    InvalidCurrent(String),

    #[error("tangent frames are required but absent")]
    MissingFrames,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown campaign '{0}'")]
    UnknownCampaign(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// I/O and parse failures are environmental; everything else is a violated
    /// precondition of the requested computation.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Parse(_))
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
