use thiserror::Error;

/// Errors raised by the surrogate toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field is not strictly positive: {0}")]
    NonPositiveField(String),
    #[error("field contains non-finite values")]
    NaNField,
    #[error("invalid bandwidth {0}: sigma must be finite and positive")]
    InvalidBandwidth(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("enumeration too large: {0} candidate assignments (limit {1})")]
    TooLarge(f64, f64),
    #[error("polygon is self-intersecting (edges {0} and {1})")]
    SelfIntersectingPolygon(usize, usize),
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("bad barycentric weights: {0}")]
    BadWeights(String),
    #[error("point ({0}, {1}) lies outside the reference box")]
    OutOfBox(f64, f64),
    #[error("ray at angle {0} misses the domain boundary")]
    RayMiss(f64),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("domain has no interior nodes on this grid")]
    EmptyInterior,
    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),
    #[error("underdetermined regression: {0}")]
    Underdetermined(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
