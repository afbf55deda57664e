use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degree {degree} exceeds dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },
    #[error("reference form is zero")]
    ZeroReference,
    #[error("total degree {degree} exceeds cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },
    #[error("point is not on the unit sphere (|xi| = {norm})")]
    NotUnit { norm: f64 },
    #[error("bidegree (0,0) has no second-variation eigenvalue")]
    ZeroBidegree,
    #[error("non-finite sample {value} at node {index}")]
    NonFiniteSample { index: usize, value: f64 },
    #[error("not pseudoconvex at node {node} (levi density {value}, t = {t})")]
    NotPseudoconvex { node: usize, value: f64, t: f64 },
    #[error("levi and polar densities disagree: {levi} vs {polar}")]
    RouteMismatch { levi: f64, polar: f64 },
    #[error("reeb system is singular (top density {density})")]
    SingularReebSolve { density: f64 },
    #[error("flow finite difference failed its self-check (change {change})")]
    FlowStepUnstable { change: f64 },
    #[error("hessian not positive definite at {point:?}")]
    NotConvexAt { point: Vec<f64> },
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },
    #[error("omega_f not positive at node {node} (margin {margin})")]
    NotKahler { node: usize, margin: f64 },
    #[error("auxiliary volume element is zero")]
    ZeroVolumeElement,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
