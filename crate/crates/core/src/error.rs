use thiserror::Error;

pub type Result<T, E = LodError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LodError {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("level {level} out of range (hierarchy has {count} levels)")]
    LevelOutOfRange { level: usize, count: usize },

    #[error("vertex {0} is not an interior coarse vertex")]
    NotInterior(usize),

    #[error("ellipticity violated: {0}")]
    Ellipticity(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("coefficient raster of width {raster_m} does not align with mesh of width {mesh_m} (raster_m must divide mesh_m)")]
    Misaligned { raster_m: usize, mesh_m: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("rank-deficient constraints: {0}")]
    RankDeficient(String),

    #[error("patch around vertex {0} has no interior fine degrees of freedom")]
    EmptyPatch(usize),

    #[error("corrector post-check failed at vertex {vertex}: {msg}")]
    CorrectorCheck { vertex: usize, msg: String },

    #[error("corrector solves failed at vertices {vertices:?}: {first}")]
    CorrectorFailures {
        vertices: Vec<usize>,
        first: Box<LodError>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corrector cache: {0}")]
    Cache(String),
}
