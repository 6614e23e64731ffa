use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("spacing {spacing_cm} cm does not divide extent {extent_cm} cm")]
    NonDivisibleSpacing { extent_cm: f64, spacing_cm: f64 },

    #[error("grid index ({i}, {j}, {k}) out of bounds for {n_per_axis} points per axis")]
    IndexOutOfBounds {
        i: i64,
        j: i64,
        k: i64,
        n_per_axis: usize,
    },

    #[error("trajectory point {frame} leaves the grid (world {world:?} cm)")]
    TrajectoryOutOfBounds { frame: usize, world: [f64; 3] },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("trajectory length mismatch: {a} vs {b}")]
    TrajectoryLengthMismatch { a: usize, b: usize },

    #[error("trajectories reference different grids")]
    GridMismatch,

    #[error("intensity must be positive, got {0}")]
    NonPositiveIntensity(f64),

    #[error("light source coincides with a surface point")]
    DegenerateLight,

    #[error("light lies on the canvas plane")]
    LightOnCanvasPlane,

    #[error("invalid scene parameter: {0}")]
    InvalidScene(String),

    #[error("caption template bank is empty")]
    EmptyTemplateBank,

    #[error("sample `{0}` not found in manifest")]
    SampleNotFound(String),

    #[error("dataset integrity failure for {path}: {reason}")]
    DatasetIntegrity { path: PathBuf, reason: String },

    #[error("image shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("metric requires at least {required} frames, got {got}")]
    TooFewFrames { required: usize, got: usize },

    #[error("frame sequence length mismatch: {a} vs {b}")]
    SequenceLengthMismatch { a: usize, b: usize },

    #[error("embedder dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png error at {path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
