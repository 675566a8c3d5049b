use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("domain error in {op}: entry {index} has value {value}")]
    Domain {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("non-finite value in {context}")]
    Numeric { context: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("index {index} out of range 0..{len}")]
    Index { index: usize, len: usize },

    #[error("episode already complete after {steps} steps")]
    EpisodeComplete { steps: usize },

    #[error("episode not terminal: step {step} of {len}")]
    NotTerminal { step: usize, len: usize },

    #[error("schedule of length {len} too long for exhaustive search ({evaluations} evaluations; limit is 4 attributes)")]
    ScheduleTooLong { len: usize, evaluations: u64 },

    #[error("self-critical baseline needs at least 2 trajectories, got {0}")]
    BaselineUndefined(usize),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("correlation undefined: {0} input is constant")]
    UndefinedCorrelation(&'static str),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by non-finite arithmetic rather than by bad
    /// input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric { .. } | Error::NonFiniteGradient(_) | Error::Domain { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
