use thiserror::Error;

/// Errors shared across the toolkit.
///
/// Domain failures (infeasible problems, arbitrage, degenerate data) are kept
/// distinct from malformed-input failures so callers can map them to
/// different exit statuses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{context} contains a non-finite entry at position {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("weights must sum to 1 (got {sum}, tolerance {tol})")]
    NotProbability { sum: f64, tol: f64 },

    #[error("points {first} and {second} are identical; support points must be distinct")]
    DuplicatePoint { first: usize, second: usize },

    #[error("negative entry {value} at position {index} in {context}")]
    NegativeEntry {
        context: &'static str,
        index: usize,
        value: f64,
    },

    #[error("source row {row} has no admissible destination")]
    EmptyRow { row: usize },

    #[error("target column {col} has positive weight but zero effective mass under the source")]
    DegenerateMass { col: usize },

    #[error(
        "mass-change factor {value} at pair ({row}, {col}) is below the dual-theory floor {floor}"
    )]
    MassChangeTooSmall {
        row: usize,
        col: usize,
        value: f64,
        floor: f64,
    },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("problem is unbounded (objective decreases without limit)")]
    Unbounded,

    #[error("iteration limit {limit} exceeded")]
    IterationLimit { limit: usize },

    #[error("basis matrix is numerically singular")]
    SingularBasis,

    #[error("root bracketing failed: {detail}")]
    BracketFailure { detail: String },

    #[error("precondition violated: {what}")]
    PreconditionViolated { what: String },

    #[error("dual potentials are inadmissible (max violation {violation})")]
    InadmissiblePotentials { violation: f64 },

    #[error("market contains an arbitrage cycle; consistent prices do not exist")]
    ArbitragePresent,

    #[error("vertex {vertex} cannot be reached by directed trades from the numeraire")]
    Unreachable { vertex: usize },

    #[error("portfolio has zero total value")]
    ZeroValuePortfolio,

    #[error("component {index} of the star solution is negative ({value}); conditioning failure")]
    NegativeComponent { index: usize, value: f64 },

    #[error("trade oversells asset {index}: plan diagonal would be {value}")]
    DiagonalNegative { index: usize, value: f64 },

    #[error(
        "flow endpoint does not reach an admissible target distribution (deviation {deviation})"
    )]
    EndpointInfeasible { deviation: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    /// True for malformed-input failures, false for domain failures.
    /// The CLI maps the former to exit 2 and the latter to exit 1.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::NonFinite { .. }
                | Error::NotProbability { .. }
                | Error::DuplicatePoint { .. }
                | Error::NegativeEntry { .. }
        )
    }
}
