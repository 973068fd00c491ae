use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trace too short for delay: {len} points, group delay {delay}")]
    TraceTooShort { len: usize, delay: usize },

    #[error("incompatible traces: {0}")]
    IncompatibleTraces(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown stage `{0}`")]
    UnknownStage(String),

    #[error("invalid feedback edge {from} -> {to}: {reason}")]
    Feedback {
        from: String,
        to: String,
        reason: String,
    },

    #[error("group delay {delay} exceeds max-delay {max}")]
    DelayBudget { delay: usize, max: usize },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("drag generation failed: {0}")]
    Generation(String),

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("spec file line {line}: {msg}")]
    SpecParse { line: usize, msg: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
