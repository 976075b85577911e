use thiserror::Error;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("exact integer overflow while computing {what}")]
    Overflow { what: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature order {order} outside supported range 1..={max}")]
    QuadratureOrder { order: usize, max: usize },

    #[error("non-finite integrand value at node {node:?}")]
    NonFinite { node: Vec<f64> },

    #[error("moment ({alpha:?}, {beta:?}) failed: {source}")]
    Moment {
        alpha: Vec<u32>,
        beta: Vec<u32>,
        #[source]
        source: Box<FockError>,
    },

    #[error("basis of size {size} exceeds cap {cap} (dense operator needs ~{bytes} bytes)")]
    BasisTooLarge { size: usize, cap: usize, bytes: u128 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("derivative orders {a:?} + {b:?} do not sum to 2k = {two_k:?}")]
    IndexMismatch { a: Vec<u32>, b: Vec<u32>, two_k: Vec<u32> },

    #[error("not a Lagrangian frame: {0}")]
    NotLagrangian(String),

    #[error("measure is not horizontal: {0}")]
    NotHorizontal(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },
}

pub type Result<T> = std::result::Result<T, FockError>;
