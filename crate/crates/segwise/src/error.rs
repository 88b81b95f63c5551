use std::fmt;

/// Errors produced by the detection library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A non-finite value (NaN or infinity) was found in input data.
    NonFinite { row: usize, col: usize },
    /// The input series is empty or has zero dimension.
    EmptySeries,
    /// Flat value buffer length is not a multiple of the dimension.
    ShapeMismatch { len: usize, dim: usize },
    /// Segment query with `a >= b` or `b` past the end of the series.
    InvalidRange { a: usize, b: usize, n: usize },
    /// Split index does not lie strictly inside the segment.
    InvalidSplit { a: usize, m: usize, b: usize },
    /// Boundary shift would empty the donating segment.
    InvalidShift { t: usize, max: usize },
    /// Change points are out of range or not strictly increasing.
    InvalidChangePoints(String),
    /// Not enough observations for the requested fit.
    SliceTooShort { needed: usize, got: usize },
    /// No segmentation with the requested number of change points
    /// satisfies the minimum segment length.
    Infeasible { k: usize, n: usize, min_len: usize },
    /// Inconsistent or out-of-domain configuration.
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite { row, col } => {
                write!(f, "non-finite value at row {row}, column {col}")
            }
            Error::EmptySeries => write!(f, "series must contain at least one observation"),
            Error::ShapeMismatch { len, dim } => {
                write!(f, "buffer of length {len} is not a multiple of dimension {dim}")
            }
            Error::InvalidRange { a, b, n } => {
                write!(f, "invalid segment range ({a}, {b}] for series of length {n}")
            }
            Error::InvalidSplit { a, m, b } => {
                write!(f, "split index {m} must satisfy {a} < {m} < {b}")
            }
            Error::InvalidShift { t, max } => {
                write!(f, "shift {t} must be in 1..{max}")
            }
            Error::InvalidChangePoints(msg) => write!(f, "invalid change points: {msg}"),
            Error::SliceTooShort { needed, got } => {
                write!(f, "slice too short: need at least {needed} observations, got {got}")
            }
            Error::Infeasible { k, n, min_len } => write!(
                f,
                "no segmentation with {k} change points and minimum segment length {min_len} \
                 exists for {n} observations"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    /// True when the error stems from configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Infeasible { .. } | Error::InvalidShift { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
