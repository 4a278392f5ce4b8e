use thiserror::Error;

/// Crate-wide error type.
///
/// The variants that matter for process exit codes are `Config` (2),
/// `StageEmpty` (3) and `DigestMismatch` (4); everything else maps to 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("backend '{backend}' failed: {msg}")]
    Backend { backend: String, msg: String },

    #[error("backend '{backend}' transient failure: {msg}")]
    BackendTransient { backend: String, msg: String },

    #[error("backend reply '{reply}' not mappable to any risk category")]
    UnmappableCategory { reply: String },

    #[error("fidelity floor unmet: best candidate scored {best:.3}, floor {floor:.3}")]
    FidelityFloor { best: f64, floor: f64 },

    #[error("no candidate survived selection: {0}")]
    EmptySurvivors(String),

    #[error("lambda {0} outside [0,1]")]
    LambdaRange(f64),

    #[error("response could not be judged: {0}")]
    Unjudged(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("stage '{0}' produced zero outputs")]
    StageEmpty(String),

    #[error("config digest mismatch: manifest has {manifest}, current config is {current}")]
    DigestMismatch { manifest: String, current: String },

    #[error("metric undefined: {0}")]
    MetricUndefined(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::StageEmpty(_) => 3,
            Error::DigestMismatch { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
