use std::path::PathBuf;

use thiserror::Error;

/// Coarse grouping of failures, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Parse,
    Shape,
    Numerical,
}

#[derive(Debug, Error)]
pub enum HsiError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header line {line}: {reason} (`{text}`)")]
    HeaderParse {
        line: usize,
        text: String,
        reason: String,
    },
    #[error("header is missing required field `{0}`")]
    MissingField(String),
    #[error("binary size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("unsupported ENVI data type code {0}")]
    UnsupportedDataType(u32),
    #[error("no companion binary found for header {0}")]
    MissingBinary(PathBuf),
    #[error("invalid spectral axis: {0}")]
    InvalidAxis(String),
    #[error("pixel ({row}, {col}) is outside a {height}x{width} cube")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("band count mismatch: cube has {cube} bands, reference has {reference}")]
    BandCountMismatch { cube: usize, reference: usize },
    #[error("every band is dead (white <= dark)")]
    AllBandsDead,
    #[error("target wavelength {0} nm lies outside the source axis")]
    ExtrapolationRequested(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("spatial dims {height}x{width} are not divisible by scale {scale}")]
    IndivisibleDims {
        height: usize,
        width: usize,
        scale: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("cube width {0} is too narrow for shift-difference noise estimation")]
    TooNarrow(usize),
    #[error("noise covariance has zero trace")]
    SingularNoise,
    #[error("requested {k} items but only {available} are available")]
    KTooLarge { k: usize, available: usize },
    #[error("class {0} has no training pixels")]
    EmptyClass(u32),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("at least two classes are required, found {0}")]
    SingleClass(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {0} is outside the valid class range")]
    InvalidLabel(u32),
    #[error("matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("simplex volume is zero after {0} restarts")]
    DegenerateSimplex(usize),
    #[error("endmember search collapsed at round {0}")]
    RankCollapse(usize),
    #[error("zero vector has no spectral angle")]
    ZeroVector,
    #[error("endmember rejection sampling exhausted after {0} attempts")]
    RejectionExhausted(usize),
    #[error("abundance cap {cap} is infeasible for {p} endmembers")]
    InfeasibleCap { cap: f64, p: usize },
    #[error("malformed text input at line {line}: {reason}")]
    TextParse { line: usize, reason: String },
}

impl HsiError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HsiError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use HsiError::*;
        match self {
            Io { .. } => ErrorCategory::Io,
            HeaderParse { .. }
            | MissingField(_)
            | SizeMismatch { .. }
            | UnsupportedDataType(_)
            | MissingBinary(_)
            | TextParse { .. } => ErrorCategory::Parse,
            IllConditioned(_)
            | DegenerateSimplex(_)
            | RankCollapse(_)
            | SingularNoise
            | ZeroVector
            | RejectionExhausted(_)
            | AllBandsDead => ErrorCategory::Numerical,
            _ => ErrorCategory::Shape,
        }
    }
}

pub type Result<T> = std::result::Result<T, HsiError>;
