use thiserror::Error;

/// Errors raised while constructing grids and fields or reading field files.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} values, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("not a field file: unknown magic {0:?}")]
    BadMagic(String),
    #[error("unsupported field format version {0:?}")]
    UnsupportedVersion(String),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("gain undefined: reference spectrum is zero")]
    UndefinedGain,
    #[error("transfer function undefined: predictor spectrum is zero")]
    UndefinedTransfer,
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("stencil extent {stencil} exceeds grid size {grid} on axis {axis}")]
    StencilTooLarge {
        axis: usize,
        stencil: usize,
        grid: usize,
    },
    #[error("coherence requires a smoothed periodogram")]
    Unsmoothed,
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("replicate index {index} out of range for {reps} replicates")]
    ReplicateOutOfRange { index: usize, reps: usize },
    #[error("empty replicate pairing")]
    EmptyPairing,
    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
    #[error("zero temporal variance at variable {var}, cell {cell}")]
    ZeroVariance { var: usize, cell: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("dense simulation needs N*p <= {limit}, got {size}")]
    TooLargeForDense { size: usize, limit: usize },
    #[error("circulant embedding has negative spectrum after maximum expansion")]
    EmbeddingFailed,
    #[error("covariance factorization failed")]
    Factorization,
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("unsupported request: {0}")]
    Unsupported(String),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("frequency band contains no usable frequencies")]
    EmptyBand,
    #[error("nonpositive periodogram value {value} at frequency index {index}")]
    NonPositivePeriodogram { index: usize, value: f64 },
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
}
