use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point maps to infinity (|w| = {w:e})")]
    PointAtInfinity { w: f64 },

    #[error("homography is singular")]
    SingularMatrix,

    #[error("cannot normalize the zero matrix")]
    ZeroMatrix,

    #[error("index out of range: {what} (got {index}, limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("image {width}x{height} too small for {levels} pyramid levels")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("insufficient overlap at pyramid level {level}: {fraction:.3} < {required:.3}")]
    InsufficientOverlap {
        level: usize,
        fraction: f64,
        required: f64,
    },

    #[error(
        "degenerate image gradient at pyramid level {level} (condition estimate {condition:e})"
    )]
    DegenerateGradient { level: usize, condition: f64 },

    #[error("too few frames: need at least {required}, got {got}")]
    TooFewFrames { required: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("texture size {0} is below the minimum of 64")]
    SizeTooSmall(usize),

    #[error("missing directory: {}", .0.display())]
    MissingDirectory(PathBuf),

    #[error("resolution mismatch in {}: expected {expected:?}, got {got:?}", path.display())]
    ResolutionMismatch {
        path: PathBuf,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("illegal label value {value} in {}", path.display())]
    IllegalLabelValue { path: PathBuf, value: u8 },

    #[error("incomplete fold assignment: {0}")]
    IncompleteAssignment(String),

    #[error("fold {fold} has {count} videos, expected 3")]
    FoldSizeViolation { fold: u8, count: usize },

    #[error("parse error in {}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {}: {source}", path.display())]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error on {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
