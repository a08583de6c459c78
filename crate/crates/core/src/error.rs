use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("time index {time_index} at line {line} is outside [0, {n_steps})")]
    TimeIndexOutOfRange {
        line: u64,
        time_index: usize,
        n_steps: usize,
    },

    #[error("duplicate cell for sample {sample_id:?} at time {time_index} (line {line})")]
    DuplicateCell {
        line: u64,
        sample_id: String,
        time_index: usize,
    },

    #[error("no samples")]
    NoSamples,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ordinal value {value} of feature {feature:?} is not among the declared levels")]
    UndeclaredLevel { feature: String, value: f64 },

    #[error("invalid column spec: {0}")]
    Spec(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Numerical(_) => false,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}
