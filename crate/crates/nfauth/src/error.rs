//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by trace handling, scoring, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("time travel: event at {now} precedes recorded state at {last}")]
    TimeTravel { now: u64, last: u64 },

    #[error("degenerate inference input: all rule firing strengths underflowed to zero")]
    DegenerateInput,

    #[error("least-squares solve failed: design matrix rank-deficient even with ridge damping (condition estimate {condition:.3e})")]
    Solver { condition: f64 },

    #[error("non-finite gradient for membership function {mf} of input {input}")]
    NonFiniteGradient { input: usize, mf: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Tag an error with the experiment stage it came from; nested stage
    /// tags are not stacked.
    pub fn in_stage(stage: &'static str, err: Error) -> Error {
        match err {
            Error::Stage { .. } => err,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

/// Extension for tagging fallible stage results.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::in_stage(stage, e.into()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
