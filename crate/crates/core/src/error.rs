use std::path::PathBuf;

/// Errors produced anywhere in the training, search and evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("candidate {id}: {source}")]
    Candidate {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("candidate event at iteration {iteration} failed: {source}")]
    EventFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
        dump: Box<StateDump>,
    },

    #[error("diverged: {message} (params checksum {checksum:016x})")]
    Diverged { message: String, checksum: u64 },

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Pipeline state at the moment a candidate event failed.
#[derive(Debug, Clone)]
pub struct StateDump {
    pub incumbent: crate::nn::FlatParams,
    pub anchors: Vec<crate::nn::FlatParams>,
    pub seeds: Vec<u64>,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
