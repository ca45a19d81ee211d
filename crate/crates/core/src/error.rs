use thiserror::Error;

pub type Result<T> = std::result::Result<T, QremError>;

#[derive(Debug, Error)]
pub enum QremError {
    #[error("bitstring width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("invalid bitstring label {0:?}")]
    InvalidLabel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} of {size} exceeds the cap of {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("calibration block on qubits {qubits:?} is not invertible (|det| = {det:e})")]
    NonInvertible { qubits: Vec<usize>, det: f64 },

    #[error("degenerate constraint: {0}")]
    DegenerateConstraint(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{angles} angles cannot resolve the q={order} coherence (need at least {required})")]
    Aliasing {
        angles: usize,
        order: usize,
        required: usize,
    },

    #[error("invalid noise model: {0}")]
    InvalidModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QremError {
    /// True for failures caused by the numerical content of the inputs
    /// rather than their shape or size.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            QremError::NonInvertible { .. } | QremError::DegenerateConstraint(_)
        )
    }

    pub fn is_size_cap(&self) -> bool {
        matches!(self, QremError::SizeCap { .. })
    }
}
