use std::fmt;

/// Which block-diagonal factor of an adapter a block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Left,
    Right,
}

impl Factor {
    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Left => "left",
            Factor::Right => "right",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Some eigenphase lies within `guard` radians of ±π, so the principal
    /// logarithm (and the inverse Cayley map) is not usable.
    #[error("eigenvalue too close to -1: phase {phase:.17e} is within {guard:e} rad of pi")]
    EigenvalueNearMinusOne { phase: f64, guard: f64 },

    #[error("scaled phase {scaled:.17e} reaches pi - {guard:e}")]
    PhaseOverflow { scaled: f64, guard: f64 },

    #[error("linear solve failed in {context}: {detail}")]
    SolveFailed { context: &'static str, detail: String },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("b must divide n (b = {b}, n = {n})")]
    BlockSize { b: usize, n: usize },

    #[error("matrix is not exactly skew-symmetric")]
    NotSkew,

    #[error("matrix is not orthogonal: residual {residual:e} exceeds {tolerance:e}")]
    NotOrthogonal { residual: f64, tolerance: f64 },

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("{factor} block {index}: {source}")]
    Block {
        factor: Factor,
        index: usize,
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle budget exceeded: {what} = {value} > {max}")]
    OracleBudget {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("ALS objective increased from {previous:e} to {current:e} at iteration {iteration}")]
    ObjectiveIncreased {
        iteration: usize,
        previous: f64,
        current: f64,
    },
}

impl Error {
    pub(crate) fn in_block(self, factor: Factor, index: usize) -> Error {
        Error::Block {
            factor,
            index,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through block-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Block { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for the numerical guards (eigenvalue near −1, phase overflow).
    pub fn is_guard(&self) -> bool {
        matches!(
            self.root(),
            Error::EigenvalueNearMinusOne { .. } | Error::PhaseOverflow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
