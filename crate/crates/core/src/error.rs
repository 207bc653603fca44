use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("point ({u}, {v}) is not inside the open unit disk")]
    OutsideDisk { u: f64, v: f64 },

    #[error("matrix determinant {det} is not 1 (tolerance 1e-12)")]
    NotUnimodular { det: f64 },

    #[error("geodesic endpoints coincide at angle {theta}")]
    DegenerateGeodesic { theta: f64 },

    #[error("guard violation: {what} = {value} exceeds limit {limit}")]
    Guard {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("domain reduction escaped after {steps} steps (distance to basepoint {distance})")]
    DomainEscape { steps: usize, distance: f64 },

    #[error("word {word} has no fixed points on R/{k}Z (lift displacement {displacement})")]
    NoFixedPoints {
        word: String,
        k: u32,
        displacement: i64,
    },

    #[error("circle point {s} is not fixed by {word} (residual {residual})")]
    NotFixed { word: String, s: f64, residual: f64 },

    #[error("boundary point {theta} is not a fixed point of {word}")]
    NotAxisEndpoint { word: String, theta: f64 },

    #[error("word {word} does not evaluate to a hyperbolic isometry")]
    NotHyperbolic { word: String },

    #[error("interval of fiber length {length} exceeds one period of the equivariant map")]
    IntervalTooLong { length: f64 },

    #[error("fiber coordinate {s} lies outside the chart anchored at {anchor} (width {width})")]
    OutsideChart { s: f64, anchor: f64, width: f64 },

    #[error("mollifier grid too coarse: {have} samples per unit, need at least {need} for scale {scale}")]
    GridTooCoarse {
        have: usize,
        need: usize,
        scale: u32,
    },

    #[error("integrator local error estimate {estimate:e} exceeds {limit:e} at t = {t}")]
    StepSizeFailure { estimate: f64, limit: f64, t: f64 },

    #[error("first return undefined on transversal of radius {radius}: {reason}")]
    TransversalTooLarge { radius: f64, reason: String },

    #[error("finite-difference Jacobian is ill conditioned ({detail})")]
    JacobianConditioning { detail: String },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("word parse error: {0}")]
    WordParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
