use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("unknown id {0}")]
    UnknownId(u32),
    #[error("illegal warp plan")]
    IllegalPlan,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("special id {0} not allowed in input sequence")]
    SpecialInInput(u32),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sequence of length {len} exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("no predictions in batch")]
    NoPredictions,
    #[error("divergence: non-finite gradient")]
    Divergence,
    #[error("empty reference")]
    EmptyReference,
    #[error("inconsistent alignment: {0}")]
    InconsistentAlignment(String),
    #[error("missing CLS token at position 0")]
    MissingCls,
    #[error("vocab hash mismatch: checkpoint has {expected}, vocab has {actual}")]
    VocabMismatch { expected: String, actual: String },
    #[error("invalid IOB sequence: {0}")]
    InvalidIob(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: &std::path::Path, e: io::Error) -> Self {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

pub(crate) fn read_to_string(path: impl AsRef<std::path::Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

pub(crate) fn write(path: impl AsRef<std::path::Path>, bytes: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
}
