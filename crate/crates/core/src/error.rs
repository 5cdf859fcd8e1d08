use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Precondition violated by the caller (wrong dimension, unknown site, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Model document or preset parameters failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// `beta` lies outside the convergence region and no override was given.
    #[error(
        "|beta| = {modulus} exceeds the convergence radius 1/(e^4 * Delta) = {bound} \
         (Delta = {max_degree}); pass --force-region to run without the error guarantee"
    )]
    OutsideRegion {
        modulus: f64,
        bound: f64,
        max_degree: usize,
    },

    /// The graph has no edges; `Z = d^|X|` and no expansion is needed.
    #[error("model has no edges (Delta = 0); Z = d^|X| exactly")]
    Edgeless,

    /// A computation would exceed a dense-dimension or enumeration cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// An iterative numerical routine failed.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
