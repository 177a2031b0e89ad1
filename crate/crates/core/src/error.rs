use thiserror::Error;

use crate::optimizer::OptimizationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("tape graph is not topologically ordered at node {0}")]
    CycleDetected(usize),

    #[error("backward root must be a scalar, got {0} values")]
    NonScalarRoot(usize),

    #[error("could not place `{id}` without overlap after {attempts} attempts")]
    PlacementFailure { id: String, attempts: usize },

    #[error("container `{0}` is too small to hold its members")]
    DegenerateContainer(String),

    #[error("label `{0}` is not in the embedding table")]
    UnknownLabel(String),

    #[error("unknown element id `{0}`")]
    UnknownElement(String),

    #[error("constraint references unknown id `{0}`")]
    UnknownConstraintTarget(String),

    #[error("task of type {0} requires a destination")]
    MissingDestination(u8),

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("layout has no encodable elements")]
    EmptyLayout,

    #[error("observed values have zero variance")]
    ZeroVariance,

    #[error("sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("invalid oracle profile: {0}")]
    InvalidProfile(String),

    #[error("at least 3 virtual users are required, got {0}")]
    TooFewUsers(usize),

    #[error("loss became non-finite at epoch {epoch} on layout `{layout}`")]
    NonFiniteLoss { epoch: usize, layout: String },

    #[error("objective became non-finite at optimization step {step}")]
    NonFiniteObjective { step: usize, trace: Box<OptimizationTrace> },

    #[error("initial layout is infeasible: {0}")]
    InfeasibleLayout(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("model file shape mismatch: {0}")]
    ModelShape(String),

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
