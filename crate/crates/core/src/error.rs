use std::io;

/// Errors surfaced by the join engine and its harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(
        "no ground truth available for this dataset and threshold; \
         run `simjoin groundtruth` first and pass the file with --truth"
    )]
    MissingGroundTruth,

    #[error("ground truth does not match: {0}")]
    GroundTruthMismatch(String),

    #[error("malformed ground truth file: {0}")]
    GroundTruthFormat(String),

    #[error("unknown report format `{0}` (expected csv or json)")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
