use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by jet arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet shape mismatch: ({0} vars, order {1}) vs ({2} vars, order {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("multi-index order {0} exceeds truncation order {1}")]
    OrderExceeded(usize, usize),
    #[error("reciprocal of a jet with zero constant term")]
    ReciprocalZero,
    #[error("sqrt of a jet with non-positive constant term {0}")]
    SqrtNonPositive(f64),
    #[error("composition requires zero constant term in inner jet {0} (found {1})")]
    NonzeroInnerConstant(usize, f64),
    #[error("composition expects {expected} inner jets, got {got}")]
    InnerCountMismatch { expected: usize, got: usize },
}

/// Errors raised while evaluating an expression over some scalar type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by a scalar with zero value")]
    DivisionByZero,
    #[error("sqrt of a negative value {0}")]
    SqrtNegative(f64),
    #[error("variable index {0} out of range ({1} supplied)")]
    VariableOutOfRange(usize, usize),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Expression parse errors. Offsets are byte offsets into the source string.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {0}: {1}")]
    Syntax(usize, String),
    #[error("unknown identifier `{1}` at offset {0}")]
    UnknownIdentifier(usize, String),
    #[error("exponent must be an integer literal at offset {0}")]
    NonIntegerExponent(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{context}: matrix is degenerate (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Degenerate {
        context: &'static str,
        pivot: f64,
        threshold: f64,
    },
    #[error("signature mismatch: declared ({0}, {1}), computed ({2}, {3})")]
    SignatureMismatch(usize, usize, usize, usize),
    #[error("metric is not symmetric: entry ({0},{1}) differs from ({1},{0}) by {2:.3e}")]
    AsymmetricMetric(usize, usize, f64),
    #[error("submanifold must have positive codimension: dim {k} in ambient dim {n}")]
    CodimensionZero { k: usize, n: usize },
    #[error("frame construction failed: candidate {candidate} projects to a near-null vector (|g(v,v)| = {norm:.3e})")]
    NearNullDirection { candidate: usize, norm: f64 },
    #[error("frame construction exhausted candidates for a {wanted} slot of sign {sign:+}")]
    FrameIncomplete { wanted: &'static str, sign: i8 },
    #[error("integration exceeded the step budget ({0} steps)")]
    StepBudgetExhausted(usize),
    #[error("integrator tolerance not met: step-halving disagreement {achieved:.3e} exceeds target {target:.3e}")]
    ToleranceNotMet { achieved: f64, target: f64 },
    #[error("point lies outside the chart radius: |(x,u)| = {norm:.3} > {radius:.3}")]
    OutsideChartRadius { norm: f64, radius: f64 },
    #[error("jet order {have} too low: {context} needs at least {need}")]
    OrderTooLow {
        context: &'static str,
        have: usize,
        need: usize,
    },
    #[error("tensor list too shallow: need {need} entries ({context}), got {have}")]
    DepthTooLow {
        context: &'static str,
        have: usize,
        need: usize,
    },
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
