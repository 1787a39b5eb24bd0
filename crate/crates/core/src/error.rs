use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate label {label:?} in {set} vocabulary")]
    DuplicateLabel { set: &'static str, label: String },

    #[error("vocabulary file {0} is empty")]
    EmptyVocabulary(PathBuf),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("parse error at line {line}{}: {message}", column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse { line: usize, column: Option<String>, message: String },

    #[error("non-finite score at index {0}")]
    InvalidScore(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no precomputed prediction for video {video_id} frame {frame_index}")]
    MissingPrediction { video_id: String, frame_index: u32 },

    #[error("empty context: {0}")]
    EmptyContext(&'static str),

    #[error("generation was empty after trimming")]
    EmptyGeneration,

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend returned HTTP {status}")]
    BackendError { status: u16 },

    #[error("backend request timed out")]
    BackendTimeout,

    #[error("no embedding stored for key {0:?}")]
    MissingEmbedding(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("cannot embed empty text")]
    EmptyText,

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    #[error("video has no frames")]
    EmptyVideo,

    #[error("no class has a positive example")]
    NoPositiveClass,

    #[error("fraction {0} selects no training videos")]
    InvalidFraction(f64),

    #[error("missing prerequisite artifact; run `{0}` first")]
    PrerequisiteMissing(&'static str),

    #[error("artifact {0} already exists; runs never overwrite artifacts")]
    ArtifactExists(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Parse { line, column: column.map(str::to_owned), message: message.into() }
    }
}
