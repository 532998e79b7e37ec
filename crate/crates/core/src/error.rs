use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("frame {frame} out of range 1..={n_frames}")]
    FrameOutOfRange { frame: u32, n_frames: u32 },
    #[error("non-monotonic frame index: got {got} after {last}")]
    NonMonotonicFrame { got: u32, last: u32 },
    #[error("invalid gap set: {0}")]
    InvalidGapSet(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("too many variables for brute force: {0} (limit {1})")]
    TooManyVariables(usize, usize),
    #[error("missing source frame {0}")]
    MissingFrame(u32),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
