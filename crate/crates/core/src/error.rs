use thiserror::Error;

/// Errors raised by the regression, smoothing and filtering routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("objective is not finite at {0:?}")]
    NonFiniteObjective(Vec<f64>),
    #[error("kernel domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("variance {0:e} is degenerate")]
    DegenerateVariance(f64),
    #[error("design is singular and the noise variance is zero")]
    SingularDesign,
    #[error("predictive variance {0:e} is negative beyond round-off")]
    NegativeVariance(f64),
    #[error("posterior forms disagree by {0:e}")]
    FormMismatch(f64),
    #[error("inputs are not an equidistant grid")]
    NonEquidistantGrid,
    #[error("duplicate input at index {0}")]
    DuplicateInputs(usize),
    #[error("k={k} is outside 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("sequence of length {len} is too short (needs more than {order})")]
    SequenceTooShort { len: usize, order: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("optimizer diverged: {0}")]
    OptimizerDivergence(String),
    #[error("target density is not finite at the initial state")]
    NonFiniteTarget,
    #[error("dataset is empty")]
    EmptyDataset,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::SingularMatrix => "singular_matrix",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NonFinite(_) => "non_finite",
            Error::NonFiniteObjective(_) => "non_finite_objective",
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::SingularDesign => "singular_design",
            Error::NegativeVariance(_) => "negative_variance",
            Error::FormMismatch(_) => "form_mismatch",
            Error::NonEquidistantGrid => "non_equidistant_grid",
            Error::DuplicateInputs(_) => "duplicate_inputs",
            Error::BadK { .. } => "bad_k",
            Error::SequenceTooShort { .. } => "sequence_too_short",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::OptimizerDivergence(_) => "optimizer_divergence",
            Error::NonFiniteTarget => "non_finite_target",
            Error::EmptyDataset => "empty_dataset",
        }
    }
}
