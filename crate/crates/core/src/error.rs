use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 2 cells, got {m}")]
    GridTooSmall { m: usize },

    #[error("densities live on different grids (m = {left} vs m = {right})")]
    GridMismatch { left: usize, right: usize },

    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cannot normalize: every value is zero")]
    AllZero,

    #[error("non-finite or negative value {value} at node {node}")]
    BadValue { node: usize, value: f64 },

    #[error("density vanishes at node {node}; the ratio f0/f is unbounded there")]
    ZeroDensity { node: usize },

    #[error("invalid config: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cover misses atom {missing}")]
    NotCovering { missing: usize },

    #[error("atom count {count} exceeds the cap of {cap}")]
    AtomCap { count: usize, cap: usize },

    #[error("posterior undefined: every atom vanishes at observation {observation}")]
    PosteriorUndefined { observation: usize },

    #[error("block has zero posterior mass")]
    ZeroBlockMass,

    #[error("family is degenerate: lower metric constant {a1:e} is numerically zero")]
    DegenerateFamily { a1: f64 },

    #[error("the sandwich audit needs an exact report; got one from the greedy solver")]
    InexactReport,

    #[error("instance of {size} atoms is too large for the exact solver (limit {limit})")]
    TooLargeForExact { size: usize, limit: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, record {record}: {message}")]
    Record {
        path: PathBuf,
        record: usize,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
