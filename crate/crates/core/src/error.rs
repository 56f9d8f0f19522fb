use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the planning toolkit can report.
///
/// Each variant maps to a stable, greppable code through [`Error::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),

    #[error("alphabet labels: {0}")]
    BadLabels(String),

    #[error("marginals row {} sums to {sum} (expected 1 within 1e-9)", .row + 1)]
    RowSumError { row: usize, sum: f64 },

    #[error("marginals row {}, column {}: probability {value} is negative or not finite", .row + 1, .col + 1)]
    NegativeProbability { row: usize, col: usize, value: f64 },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("no samples given")]
    EmptySampleSet,

    #[error("sample {line}: {reason}")]
    MalformedSample { line: usize, reason: String },

    #[error("expression references unbound variable x{0}")]
    UnboundVariable(usize),

    #[error("cannot parse expression {input:?} at byte {pos}: {reason}")]
    ExpressionSyntax {
        input: String,
        pos: usize,
        reason: String,
    },

    #[error("modular arithmetic requires integer operands, got {0}")]
    NonIntegerOperand(f64),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("table size overflows u64")]
    Overflow,

    #[error("variable list is empty")]
    EmptyVariableList,

    #[error("oracle cap exceeded: {size} candidates > cap {cap}")]
    OracleCapExceeded { size: u128, cap: u128 },

    #[error("rank {rank} out of range (list has {len} entries)")]
    RankOutOfRange { rank: usize, len: usize },

    #[error("sub-function {subfunction}: ranked list has {have} entries, need {need}")]
    InsufficientRankedEntries {
        subfunction: usize,
        have: usize,
        need: usize,
    },

    #[error("capacity mismatch: {0}")]
    CapacityMismatch(String),

    #[error("invalid cost model: {0}")]
    InvalidCost(String),

    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable code used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::AlphabetTooSmall(_) => "E_ALPHABET",
            Error::BadLabels(_) => "E_LABELS",
            Error::RowSumError { .. } => "E_ROW_SUM",
            Error::NegativeProbability { .. } => "E_NEGATIVE_PROB",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::IndexOutOfRange { .. } => "E_INDEX_RANGE",
            Error::EmptySampleSet => "E_EMPTY_SAMPLES",
            Error::MalformedSample { .. } => "E_MALFORMED_SAMPLE",
            Error::UnboundVariable(_) => "E_UNBOUND_VAR",
            Error::ExpressionSyntax { .. } => "E_EXPR_SYNTAX",
            Error::NonIntegerOperand(_) => "E_NON_INTEGER",
            Error::InvalidDecomposition(_) => "E_DECOMPOSITION",
            Error::Overflow => "E_OVERFLOW",
            Error::EmptyVariableList => "E_EMPTY_VARS",
            Error::OracleCapExceeded { .. } => "E_ORACLE_CAP",
            Error::RankOutOfRange { .. } => "E_RANK_RANGE",
            Error::InsufficientRankedEntries { .. } => "E_RANKED_ENTRIES",
            Error::CapacityMismatch(_) => "E_CAPACITY",
            Error::InvalidCost(_) => "E_COST",
            Error::InfeasibleAllocation(_) => "E_ALLOCATION",
            Error::Config(_) => "E_CONFIG",
            Error::Io(_) => "E_IO",
            Error::Parse(_) => "E_PARSE",
        }
    }
}
