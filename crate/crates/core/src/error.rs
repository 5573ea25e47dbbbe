use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the navigation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument was outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The robot sits on top of a predicted pedestrian mean; the chance
    /// constraint direction is undefined there.
    #[error("degenerate geometry: robot within {distance:e} m of pedestrian mean")]
    DegenerateGeometry { distance: f64 },

    #[error("non-finite activation in layer `{layer}`")]
    NonFiniteActivation { layer: &'static str },

    #[error("non-finite gradient at parameter index {index}")]
    NonFiniteGradient { index: usize },

    #[error("training diverged: member {member}, epoch {epoch}")]
    TrainingDiverged { member: usize, epoch: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("insufficient tracks: requested {requested}, {available} usable")]
    InsufficientTracks { requested: usize, available: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported model format `{0}`")]
    ModelFormat(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
