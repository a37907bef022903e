use thiserror::Error;

/// Errors raised by the geometry, metric and flow routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("exponents must satisfy 1 <= q <= p, got p = {p}, q = {q}")]
    ExponentOrder { p: f64, q: f64 },

    #[error("octant violation at atom {index}: value {value}")]
    OctantViolation { index: usize, value: f64 },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("triangle not comparable: perimeter {perimeter} >= {bound}")]
    NotComparable { perimeter: f64, bound: f64 },

    #[error("degenerate span: rank {rank} < 3")]
    RankDeficient { rank: usize },

    #[error("unsupported resolution {resolution}: {reason}")]
    Resolution { resolution: usize, reason: &'static str },

    #[error("not Kähler: density {density:e} at site {site}")]
    NotKahler { site: usize, density: f64 },

    #[error("potential is not normalized: weighted mean {mean:e}")]
    NotNormalized { mean: f64 },

    #[error("inconsistent density: mean {mean} differs from 1")]
    InconsistentDensity { mean: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("fit domain error: nonpositive value {value} at t = {time}")]
    FitDomain { time: f64, value: f64 },

    #[error("flow degenerated at t = {time}: density {density:e} at site {site}")]
    FlowDegeneration { time: f64, site: usize, density: f64 },

    #[error("step rejection overflow at t = {time} (dt = {dt})")]
    Stiffness { time: f64, dt: f64 },

    #[error("wrong flow or backend kind: {0}")]
    Kind(String),

    #[error("construction unsuitable: {0}")]
    ConstructionUnsuitable(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
