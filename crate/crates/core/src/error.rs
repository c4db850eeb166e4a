use thiserror::Error;

use crate::tree::VertexAddress;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("degree must be at least 3, got {0}")]
    DegreeTooSmall(u32),
    #[error("invalid address {address}: label {label} at position {position} is not below {limit}")]
    InvalidLabel {
        address: String,
        position: usize,
        label: u32,
        limit: u32,
    },
    #[error("depth {0} exceeds the maximum address depth of 64")]
    TooDeep(usize),
    #[error("cannot parse vertex address {0:?}")]
    Parse(String),
    #[error("lowest common ancestor of an empty set")]
    EmptySet,
    #[error("subtree has no vertices")]
    EmptySubtree,
    #[error("subtree is disconnected at {0}")]
    Disconnected(VertexAddress),
    #[error("ball of radius {radius} has {} vertices, over the budget of {budget}", size.map_or_else(|| "too many".to_string(), |s| s.to_string()))]
    BudgetExceeded {
        radius: u32,
        size: Option<u64>,
        budget: u64,
    },
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("vertex {vertex} is outside the domain ball of radius {radius}")]
    OutOfDomain { vertex: VertexAddress, radius: u32 },
    #[error("maps live on trees of different degree ({left} vs {right})")]
    ShapeMismatch { left: u32, right: u32 },
    #[error("composition has an empty domain: the inner image of the root leaves the outer domain")]
    EmptyComposition,
    #[error("map is not order-preserving at {0}")]
    NotOrderPreserving(VertexAddress),
    #[error("table has {got} entries, the ball needs {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("invalid constant {0}: must be at least 1")]
    InvalidConstant(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("map file is missing domain vertex {0}")]
    MissingVertex(VertexAddress),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MapError {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        MapError::Format {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MixedError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("construction depth must be at least 1")]
    ZeroStep,
    #[error("radius {radius} is not a multiple of the construction depth {step}")]
    RadiusNotMultiple { radius: u32, step: u32 },
    #[error("policy failed at level {level}, class {class}: {reason}")]
    PolicyFailure {
        level: u32,
        class: VertexAddress,
        reason: String,
    },
    #[error("trace line {line}: {message}")]
    TraceFormat { line: usize, message: String },
}

impl MixedError {
    pub(crate) fn policy(level: u32, class: &VertexAddress, reason: impl Into<String>) -> Self {
        MixedError::PolicyFailure {
            level,
            class: class.clone(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Mixed(#[from] MixedError),
    #[error("input map is not order-preserving at {0}")]
    NotOrderPreserving(VertexAddress),
    #[error("input map sends the root to {0}; a root-fixing map is required")]
    RootNotFixed(VertexAddress),
    #[error("domain radius {radius} holds no full level of depth {step}")]
    RadiusTooSmall { radius: u32, step: u32 },
    #[error("depth override must be at least 1")]
    InvalidOverride,
    #[error("{0}")]
    Validation(Box<crate::transforms::FailedApproximation>),
}
