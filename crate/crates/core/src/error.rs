use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {0}: only 1 and 2 are supported")]
    InvalidDimension(usize),
    #[error("non-positive extent on axis {axis}: lower={lower}, upper={upper}")]
    NonPositiveExtent { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis} needs at least 2 interior nodes, got {count}")]
    TooFewNodes { axis: usize, count: usize },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("node {0} is not strictly inside the domain")]
    NodeNotInterior(usize),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("field has {found} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("potential is negative at node {node} (value {value})")]
    NegativePotential { node: usize, value: f64 },
    #[error("weight is not strictly positive at node {node} (value {value})")]
    NonPositiveWeight { node: usize, value: f64 },
    #[error("field vanishes on the weighted mass: Rayleigh quotient undefined")]
    ZeroDenominator,
    #[error("field is not weight-normalized (weight term {0})")]
    NotNormalized(f64),
    #[error("empty nodal domain")]
    EmptyNodalDomain,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("principal pair is not converged")]
    PrincipalNotConverged,
    #[error("no sign-changing level found above λ₁ = {lambda1} (best {best})")]
    NoSecondLevel { lambda1: f64, best: f64 },
    #[error("dense eigensolver did not converge")]
    DenseNotConverged,
    #[error("operation requires p = 2, got p = {0}")]
    RequiresQuadratic(f64),
    #[error("brute-force oracle is limited to {max} nodes, got {nodes}")]
    TooManyNodes { nodes: usize, max: usize },
    #[error("ball B({radius}) around the given centre is not contained in the domain")]
    BallNotContained { radius: f64 },
    #[error("fields must be strictly positive (node {0})")]
    NonPositiveField(usize),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
