use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Argument outside the domain of a function (e.g. linear link beyond `[-1, 1]`).
    Domain(&'static str),
    /// Vectors or matrices of incompatible sizes.
    DimensionMismatch { expected: usize, found: usize },
    /// An input that must be nonempty was empty.
    Empty(&'static str),
    /// Arm index outside the arm set.
    InvalidIndex { index: usize, len: usize },
    /// Weights that are not a probability vector.
    InvalidSimplex { sum: f64 },
    /// Every raw feature vector was zero.
    AllZero,
    /// A matrix could not be factorized.
    Singular,
    /// A design problem with a target arm outside the span of the arm set.
    Infeasible,
    /// A non-finite value came out of an objective or a link.
    NonFinite(&'static str),
    /// Rounding was asked for fewer pulls than `r(ω)`.
    RoundingPrecondition { requested: u64, required: u64 },
    /// The rounding repair loop could not certify the Loewner inequality.
    RoundingFailed,
    /// An instance with some arm on the decision boundary.
    ZeroMargin,
    /// Bad configuration value.
    InvalidParameter(&'static str),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Domain(what) => write!(f, "input outside domain: {what}"),
            CoreError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            CoreError::Empty(what) => write!(f, "empty input: {what}"),
            CoreError::InvalidIndex { index, len } => {
                write!(f, "arm index {index} out of range for {len} arms")
            }
            CoreError::InvalidSimplex { sum } => {
                write!(f, "weights are not a probability vector (sum = {sum})")
            }
            CoreError::AllZero => write!(f, "all feature vectors are zero"),
            CoreError::Singular => write!(f, "matrix is singular"),
            CoreError::Infeasible => {
                write!(f, "target arms are not spanned by the arm set")
            }
            CoreError::NonFinite(what) => write!(f, "non-finite value in {what}"),
            CoreError::RoundingPrecondition { requested, required } => write!(
                f,
                "rounding needs at least {required} pulls, got {requested}"
            ),
            CoreError::RoundingFailed => {
                write!(f, "rounding could not satisfy the information guarantee")
            }
            CoreError::ZeroMargin => write!(f, "instance has an arm with zero margin"),
            CoreError::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
