use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate metric at {point:?}")]
    DegenerateMetric { point: Vec<f64> },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("point {point:?} is outside the chart domain: {reason}")]
    OutsideDomain { point: Vec<f64>, reason: String },

    #[error("point {point:?} is not on the boundary x_n = 0")]
    NotOnBoundary { point: Vec<f64> },

    #[error("angle {value} is outside the admissible range {range}")]
    AngleOutOfRange { value: f64, range: &'static str },

    #[error("degenerate angle: sin(gamma) = {sin} at {point:?}")]
    DegenerateAngle { sin: f64, point: Vec<f64> },

    #[error("unsupported dimension n = {n} (supported: {supported})")]
    UnsupportedDimension { n: usize, supported: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("radius {r} is too small (must exceed {min})")]
    RadiusTooSmall { r: f64, min: f64 },

    #[error("stencil leaves the grid patch at node {node:?}")]
    StencilOutOfPatch { node: Vec<isize> },

    #[error("point {point:?} is not a grid node")]
    NotAGridNode { point: Vec<f64> },

    #[error("trivial eigenspinor: projection vanished")]
    TrivialEigenspinor,

    #[error("spinor is not a chirality eigenspinor (max defect {defect:e})")]
    NotEigenspinor { defect: f64 },

    #[error("vector field is not tangent to M at {point:?}")]
    NotTangent { point: Vec<f64> },

    #[error("isometry does not preserve the half-space chart: {0}")]
    NotChartPreserving(String),

    #[error("non-positive weight {value} at {point:?}")]
    NonPositiveWeight { value: f64, point: Vec<f64> },

    #[error("frame relation defect {defect:e} above tolerance")]
    FrameDefect { defect: f64 },

    #[error("unknown family '{0}'")]
    UnknownFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal: {0}")]
    Internal(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
