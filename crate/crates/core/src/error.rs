use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("degenerate vector: norm {norm:e} is below the normalization floor")]
    DegenerateVector { norm: f64 },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("schedule exhausted: step {step} >= total steps {total}")]
    ScheduleExhausted { step: u64, total: u64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("batch too small: {size} examples, need at least {min}")]
    BatchTooSmall { size: usize, min: usize },

    #[error("degenerate task: {0}")]
    DegenerateTask(String),

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("format error in {path:?}: {message}")]
    Format { path: Option<PathBuf>, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format { path: None, message: message.into() }
    }
}
