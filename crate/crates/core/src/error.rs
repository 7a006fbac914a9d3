//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by estimation, inference, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}` in input file")]
    MissingColumn(String),

    #[error("non-numeric cell `{value}` in column `{column}` at data row {row}")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("non-binary treatment value `{value}` at data row {row}")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("insufficient sample: {0} usable rows (need at least 2)")]
    InsufficientSample(usize),

    #[error("treatment arm {0} is empty in the sample")]
    MissingArm(u8),

    #[error("column lengths disagree: {0}")]
    LengthMismatch(String),

    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },

    #[error("degenerate outcome: range of y is zero")]
    DegenerateOutcome,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel dimension mismatch: spec has {expected}, argument has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bandwidth rule error: {0}")]
    BandwidthRule(String),

    #[error("tuning sequence error: {0}")]
    Tuning(String),

    #[error("empty local arm: no kernel mass for treatment arm {0} at the conditioning point")]
    EmptyLocalArm(u8),

    #[error("zero kernel mass at the conditioning point")]
    ZeroKernelMass,

    #[error("fitted propensity outside (0,1) at row {0}")]
    PropensityOutOfRange(usize),

    #[error("perfect separation detected while fitting the propensity model")]
    Separation,

    #[error("propensity fit did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("propensity model is required but not fitted")]
    UnfittedModel,

    #[error("missing input curve for regime `{regime}`: {what}")]
    MissingInputCurve { regime: String, what: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bootstrap too small: m = {m} cannot resolve the {prob} quantile")]
    BootstrapTooSmall { m: usize, prob: f64 },

    #[error("empty epsilon-argmax set at delta index {0}")]
    EmptyArgmaxSet(usize),

    #[error("unsupported regime for this operation: {0}")]
    UnsupportedRegime(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

impl Error {
    /// Stable machine-readable code for each error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumericCell { .. } => "non_numeric_cell",
            Error::NonBinaryTreatment { .. } => "non_binary_treatment",
            Error::InsufficientSample(_) => "insufficient_sample",
            Error::MissingArm(_) => "missing_arm",
            Error::LengthMismatch(_) => "length_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::DegenerateOutcome => "degenerate_outcome",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidKernel(_) => "invalid_kernel",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BandwidthRule(_) => "bandwidth_rule",
            Error::Tuning(_) => "tuning",
            Error::EmptyLocalArm(_) => "empty_local_arm",
            Error::ZeroKernelMass => "zero_kernel_mass",
            Error::PropensityOutOfRange(_) => "propensity_out_of_range",
            Error::Separation => "separation",
            Error::NoConvergence(_) => "no_convergence",
            Error::UnfittedModel => "unfitted_model",
            Error::MissingInputCurve { .. } => "missing_input_curve",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::BootstrapTooSmall { .. } => "bootstrap_too_small",
            Error::EmptyArgmaxSet(_) => "empty_argmax_set",
            Error::UnsupportedRegime(_) => "unsupported_regime",
            Error::InvalidParam(_) => "invalid_param",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
