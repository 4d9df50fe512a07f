use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pole encountered at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("resonant quasi-momentum: {0}")]
    Resonance(String),

    #[error("truncation insufficient: {0}")]
    Truncation(String),

    #[error("grid incompatible: {0}")]
    GridIncompatible(String),

    #[error("residual {got:.3e} exceeds tolerance {tol:.3e} in {context}")]
    ResidualTooLarge { context: String, got: f64, tol: f64 },

    #[error("band-group dimension jump at k-grid point {index:?}: expected {expected}, found {found}")]
    DimensionJump {
        index: (usize, usize),
        expected: usize,
        found: usize,
    },

    #[error("continuation crossed a kernel-dimension jump near alpha = {alpha}")]
    ContinuationCrossing { alpha: f64 },

    #[error("linear algebra backend: {0}")]
    Linalg(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
