use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("grid has {size} nodes, at least {min} required")]
    GridTooSmall { size: usize, min: usize },
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension {0} is not supported (need n >= 3)")]
    Dimension(usize),
    #[error("minimal hypersphere: 1 - r^2 lambda = {margin:e} at node {node} (r = {r})")]
    MinimalSphereViolation { node: usize, r: f64, margin: f64 },
    #[error("nonpositive metric coefficient {value:e} at node {node}")]
    NonpositiveMetric { node: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitialDataError {
    #[error("invalid initial data: {0}")]
    InvalidSpec(String),
    #[error("initial data contains a minimal hypersphere: sup r^2 lambda = {sup_r2_lambda}")]
    InadmissibleSpec { sup_r2_lambda: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("time step {dt:e} fell below {min:e}")]
    StepUnderflow { dt: f64, min: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("need at least {needed} equally spaced snapshots, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}
