use thiserror::Error;

use crate::types::SceneId;

/// Errors raised by pool bookkeeping, the oracle and the selection stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoneError {
    #[error("scene list is empty")]
    EmptySceneList,

    #[error("initial labeled count {requested} must be in 1..{available}")]
    InvalidInitialLabeled { requested: usize, available: usize },

    #[error("duplicate scene id {0}")]
    DuplicateScene(SceneId),

    #[error("unknown scene id {0}")]
    UnknownScene(SceneId),

    #[error("scene {0} is not in the unlabeled pool")]
    NotUnlabeled(SceneId),

    #[error("class id {class} out of range for {class_count} classes")]
    ClassOutOfRange { class: usize, class_count: usize },

    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),

    #[error("class {0} has a zero count; counts must be smoothed before weighting")]
    ZeroClassCount(usize),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("requested {requested} items from a ground set of {available}")]
    SelectionTooLarge { requested: usize, available: usize },

    #[error("ground set of {0} items is too large for exhaustive search (max 20)")]
    GroundSetTooLarge(usize),

    #[error("no labeled boxes to fit the surrogate head")]
    NoLabeledBoxes,

    #[error("labeled set is empty")]
    EmptyLabeledSet,

    #[error("unlabeled pool is empty")]
    EmptyUnlabeledPool,

    #[error("cumulative entropy undefined: labeled and candidate box totals are both zero")]
    ZeroBoxTotal,

    #[error("missing signals for scene {0}")]
    MissingSignals(SceneId),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dump line {line}: {message}")]
    Dump { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoneError {
    fn from(err: std::io::Error) -> Self {
        StoneError::Io(err.to_string())
    }
}

pub type Result<T, E = StoneError> = std::result::Result<T, E>;
