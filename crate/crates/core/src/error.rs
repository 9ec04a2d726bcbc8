use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("duplicate key: {0}")]
    Duplicate(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("unknown sentence ids: {0:?}")]
    UnknownIds(Vec<String>),
    #[error("missing predictions for ids: {0:?}")]
    MissingIds(Vec<String>),
    #[error("illegal transition for {sentence_id}: {reason}")]
    Transition { sentence_id: String, reason: String },
    #[error("column `{0}` is collinear with the fixed effects or other regressors")]
    Collinear(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("weak or degenerate instrument: {0}")]
    WeakInstrument(String),
    #[error("no convergence after {iterations} iterations (objective {objective})")]
    NoConvergence { iterations: usize, objective: f64 },
    #[error("empty class `{0}`")]
    EmptyClass(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
