use std::path::PathBuf;

use thiserror::Error;

use crate::geom::{Dims, Pos};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("raw file {path} has {actual} bytes, descriptor requires {expected}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("unknown dtype `{0}` (expected u8, u16 or f32)")]
    UnknownDtype(String),

    #[error("malformed descriptor: {0}")]
    Descriptor(String),

    #[error("voxel at {pos:?} holds {value}, values must be finite and non-negative")]
    InvalidVoxel { pos: Pos, value: f64 },

    #[error("position {pos:?} outside volume of dims {dims:?}")]
    OutOfBounds { pos: Pos, dims: Dims },

    #[error("environment size {0} must be odd and greater than 1")]
    InvalidEnvironmentSize(usize),

    #[error("level {level} outside 1..={max}")]
    InvalidLevel { level: usize, max: usize },

    #[error("invalid phantom: {0}")]
    Phantom(String),

    #[error("invalid feature configuration: {0}")]
    FeatureConfig(String),

    #[error("histogram has zero mass")]
    EmptyHistogram,

    #[error("feature vector length {actual} does not match layout length {expected}")]
    LayoutMismatch { expected: usize, actual: usize },

    #[error("training set needs both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("nu = {nu} is infeasible, must lie in (0, {nu_max}]")]
    InfeasibleNu { nu: f64, nu_max: f64 },

    #[error("invalid hyperparameter grid: {0}")]
    InvalidGrid(String),

    #[error("{0} did not converge")]
    NonConvergence(&'static str),

    #[error("model is not calibrated")]
    Uncalibrated,

    #[error("unsupported model file version {0}")]
    VersionMismatch(u32),

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("seed at {pos:?} has no full environment on level {level}")]
    SeedWithoutEnvironment { pos: Pos, level: usize },

    #[error("seed at {pos:?} labeled both +1 and -1")]
    ConflictingSeed { pos: Pos },

    #[error("malformed seed line {line}: {reason}")]
    SeedParse { line: usize, reason: String },

    #[error("no trained model for level {0}")]
    Untrained(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimsMismatch(Dims, Dims),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
