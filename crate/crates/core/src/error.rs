use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("mesh is not closed: {0}")]
    OpenMesh(String),

    #[error("mesh has inverted orientation (signed volume {0:e})")]
    InvertedMesh(f64),

    #[error("barrier evaluated at non-positive squared distance {0:e}")]
    Intersection(f64),

    #[error("CCD query started from non-positive distance {0:e}")]
    CcdContract(f64),

    #[error("Cholesky factorization failed at pivot block {block}")]
    Factorization { block: usize },

    #[error("line search underflow at step {step}, iteration {iteration} (alpha {alpha:e}, |dq|_inf {dq_norm:e})")]
    LineSearch {
        step: usize,
        iteration: usize,
        alpha: f64,
        dq_norm: f64,
    },

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("scene error: {0}")]
    Scene(String),

    #[error("initial configuration intersects: bodies `{0}` and `{1}`")]
    InitialIntersection(String, String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
