use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("mesh is empty (no vertices or no faces)")]
    EmptyMesh,

    #[error("face {face} references vertex {index}, but mesh has {vertex_count} vertices")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("face {face} is degenerate (repeated vertex index {index})")]
    DegenerateFace { face: usize, index: usize },

    #[error("vertex {index} is isolated (degree 0); cannot form a delta coordinate")]
    IsolatedVertex { index: usize },

    #[error("deform problem has no constraints; the solution would be translation-ambiguous")]
    NoConstraints,

    #[error("constraint {constraint} has non-positive weight {weight}")]
    NonPositiveWeight { constraint: usize, weight: f64 },

    #[error(
        "singular system: connected component containing vertex {representative} \
         ({size} vertices) has no constraint"
    )]
    UnconstrainedComponent { representative: usize, size: usize },

    #[error("solver did not reach tolerance {tolerance} (relative residual {residual})")]
    SolverDiverged { tolerance: f64, residual: f64 },

    #[error("vertex index {index} is out of range for mesh with {vertex_count} vertices")]
    VertexIndexOutOfRange { index: usize, vertex_count: usize },

    #[error("expected a unit vector, got length {length}")]
    NonUnitVector { length: f64 },

    #[error("map size mismatch: {expected_width}x{expected_height} vs {width}x{height}")]
    SizeMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("need at least {needed} candidate vertices, only {available} available")]
    NotEnoughVertices { needed: usize, available: usize },

    #[error("joint group `{name}` is empty")]
    EmptyJointGroup { name: String },

    #[error("joint `{name}` missing from template metadata")]
    MissingJoint { name: String },

    #[error("unknown joint name `{name}`")]
    UnknownJoint { name: String },

    #[error("vertex {index} appears in more than one joint group")]
    DuplicateGroupVertex { index: usize },

    #[error("no valid joint annotations")]
    NoValidJoints,

    #[error("pipeline stage out of order: expected {expected}, state is {actual}")]
    StageOrder {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("cannot sample {requested} views from a {available}-view candidate grid")]
    TooManyViews { requested: usize, available: usize },

    #[error("inner-surface removal would delete every face")]
    AllFacesRemoved,

    #[error("no visible ground-truth vertices from this viewpoint")]
    NoVisibleVertices,

    #[error("lighting estimation needs at least 9 usable pixels, got {pixels}")]
    TooFewShadingPixels { pixels: usize },

    #[error("unknown config key `{key}`")]
    UnknownConfigKey { key: String },

    #[error("bad value `{value}` for config key `{key}`: {msg}")]
    BadConfigValue {
        key: String,
        value: String,
        msg: String,
    },

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
