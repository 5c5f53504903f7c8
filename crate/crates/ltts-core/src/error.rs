use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("dense tensor would hold {requested} entries, cap is {cap}")]
    DenseCapExceeded { requested: usize, cap: usize },

    #[error("integer overflow computing {0}")]
    IntegerOverflow(String),

    #[error("point leaves the patch: coordinate {coordinate} is {value}, center {center}, radius {radius}")]
    OutOfPatch {
        coordinate: usize,
        value: f64,
        center: f64,
        radius: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("black box returned a non-finite value at {0:?}")]
    NonFiniteValue(Vec<f64>),

    #[error("missing simplex index {0:?} in derivative map")]
    MissingDerivative(Vec<usize>),

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("svd failed: {0}")]
    SvdFailure(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
