use thiserror::Error;

#[derive(Debug, Error)]
pub enum PglError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("pullback does not preserve the flat subspaces (residual {residual:.3e})")]
    FlatNotPreserved { residual: f64 },

    #[error("{what} is not coisotropic (residual {residual:.3e})")]
    NotCoisotropic { what: &'static str, residual: f64 },

    #[error("vector is not in the image of the anchor (residual {residual:.3e})")]
    NotInImage { residual: f64 },

    #[error("differential escapes the flat subbundle (residual {residual:.3e})")]
    NotFlatValued { residual: f64 },

    #[error("anchor is not skew (residual {residual:.3e})")]
    NotSkew { residual: f64 },

    #[error("flat basis rows are linearly dependent (rank {rank} < {rows})")]
    DependentFlatBasis { rank: usize, rows: usize },

    #[error("structure constants violate {which} (residual {residual:.3e})")]
    InvalidStructureConstants { which: &'static str, residual: f64 },

    #[error("element is on the {found} side, expected {expected}")]
    WrongSide { expected: &'static str, found: &'static str },

    #[error("matrix is not a member of {what} (residual {residual:.3e})")]
    NotMember { what: String, residual: f64 },

    #[error("pair is not composable (mismatch {residual:.3e})")]
    NotComposable { residual: f64 },

    #[error("inconsistent tangent data (residual {residual:.3e})")]
    InconsistentTangent { residual: f64 },

    #[error("matrix is not a projection (residual {residual:.3e})")]
    NotProjection { residual: f64 },

    #[error("Schatten index must be >= 1, got {0}")]
    InvalidSchattenIndex(f64),

    #[error("field family is not compatible across levels (residual {residual:.3e})")]
    IncompatibleFamily { residual: f64 },

    #[error("invalid level: {0}")]
    InvalidLevel(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("unknown instance kind `{0}`")]
    UnknownKind(String),

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PglError {
    /// The numeric residual carried by the error, if any.
    pub fn residual(&self) -> Option<f64> {
        use PglError::*;
        match self {
            FlatNotPreserved { residual }
            | NotCoisotropic { residual, .. }
            | NotInImage { residual }
            | NotFlatValued { residual }
            | NotSkew { residual }
            | InvalidStructureConstants { residual, .. }
            | NotMember { residual, .. }
            | NotComposable { residual }
            | InconsistentTangent { residual }
            | NotProjection { residual }
            | IncompatibleFamily { residual } => Some(*residual),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, PglError>;
