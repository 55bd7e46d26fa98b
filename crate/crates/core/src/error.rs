use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate normal at ({x:.6}, {y:.6}, {z:.6}): gradient norm {norm:e}")]
    DegenerateNormal { x: f64, y: f64, z: f64, norm: f64 },

    #[error("non-finite field value at grid node ({i}, {j}, {k})")]
    NonFiniteField { i: usize, j: usize, k: usize },

    #[error("Cholesky factorization failed after jitter {jitter:e} (condition estimate {condition_estimate:e})")]
    Factorization { jitter: f64, condition_estimate: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("camera view contains no surface hits")]
    EmptyView,

    #[error("posterior mean has no zero crossing inside the extraction bounds")]
    EmptySurface,

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("leader contact lost for {iterations} consecutive servo iterations")]
    ContactLost { iterations: usize },

    #[error("approach failed: no surface within {max_distance} m along the approach direction")]
    ApproachFailed { max_distance: f64 },

    #[error("sliding direction is degenerate (query offset parallel to the surface normal)")]
    DegenerateDirection,

    #[error("sliding touch failed: contact lost on the first frame")]
    TouchFailed,

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown shape `{name}`; available: {}", available.join(", "))]
    NotFound { name: String, available: Vec<String> },

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
