use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::jets::JetError;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("cannot parse {context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("point {coords:?} lies outside the domain of chart {chart}")]
    OutsideDomain { chart: String, coords: Vec<f64> },
    #[error("chart mismatch: expected {expected}, found {found}")]
    ChartMismatch { expected: String, found: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("chart dimension {0} is not supported")]
    InvalidDimension(usize),
    #[error("operation requires dimension at least {required}, chart has {found}")]
    DimensionTooLow { required: usize, found: usize },
    #[error("unknown built-in {kind} {name:?}")]
    UnknownBuiltin { kind: &'static str, name: String },
    #[error("metric components g[{i}][{j}] and g[{j}][{i}] differ")]
    NotSymmetric { i: usize, j: usize },
    #[error("invalid signature {0:?}")]
    InvalidSignature(String),
    #[error("degenerate metric at {coords:?}: det = {det:e}")]
    Degenerate { coords: Vec<f64>, det: f64 },
    #[error("signature mismatch at {coords:?}: declared {declared}, found {found}")]
    SignatureMismatch {
        coords: Vec<f64>,
        declared: String,
        found: String,
    },
    #[error("tensor variance mismatch: expected {expected}, found {found}")]
    Variance {
        expected: &'static str,
        found: &'static str,
    },
    #[error("a generating scalar sigma is required for this check")]
    MissingSigma,
    #[error("field is null or zero at {coords:?} (<A,A> = {norm:e})")]
    NullField { coords: Vec<f64>, norm: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("degenerate initial frame: {0}")]
    DegenerateFrame(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
