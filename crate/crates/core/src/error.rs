use std::path::PathBuf;

use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value is NaN")]
    NotANumber,

    #[error("indeterminate sum: +inf and -inf terms both survive the pairing")]
    IndeterminateSum,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to parse `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("evaluation failed at sample point {point:?} (t = {t:e}): {source}")]
    Estimator {
        point: Vec<f64>,
        t: f64,
        #[source]
        source: EvalError,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("problem file format: {0}")]
    Format(String),

    #[error("candidate point is not feasible for (P): {0}")]
    CandidateInfeasible(String),

    #[error("point {0:?} is not in G")]
    NotInG(Vec<f64>),

    #[error("no grid point of the delta-ball lies in G")]
    EmptyFeasibleGrid,

    #[error("sampling found no point of the delta-ball outside S")]
    NoOffSPoints,
}
