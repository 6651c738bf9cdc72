use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid algebra spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("element is not positive (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("map is not adjointable (residual {residual:e})")]
    NotAdjointable { residual: f64 },
    #[error("no compact representative")]
    NoRepresentative,
    #[error("not completely positive (minimum eigenvalue {min_eigenvalue:e})")]
    NotCompletelyPositive {
        min_eigenvalue: f64,
        witness: serde_json::Value,
    },
    #[error("map is not dominated by the triplet (identity residual {residual:e}, commutator {commutator:e}, minimum eigenvalue {min_eigenvalue:e})")]
    NotInH {
        residual: f64,
        commutator: f64,
        min_eigenvalue: f64,
    },
    #[error("gamma {gamma} outside ({lower}, 1)")]
    GammaOutOfRange { gamma: f64, lower: f64 },
    #[error("operation requires a densely defined weight (p = 1)")]
    NotDenselyDefined,
    #[error("element outside the domain (residual {residual:e})")]
    NotInDomain { residual: f64 },
    #[error("seed data inconsistent: {reason} (residual {residual:e})")]
    SeedInconsistent { residual: f64, reason: String },
    #[error("weight is ill defined on the kernel of the multiplication map (residual {residual:e})")]
    IllDefined { residual: f64 },
    #[error("isometry is not surjective (rank deficit {deficit})")]
    NotSurjective { deficit: usize },
    #[error("exact-bound approximation requires a nonzero Lambda(a); use slack mode")]
    ZeroLambdaExactMode,
    #[error("slack bound {bound} does not exceed the norm {norm}")]
    SlackTooSmall { norm: f64, bound: f64 },
    #[error("functional is not positive (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveFunctional { min_eigenvalue: f64 },
    #[error("domination violated (slack {slack:e})")]
    DominationViolated { slack: f64 },
    #[error("family is not increasing at index {index} (slack {slack:e})")]
    NotMonotone { index: usize, slack: f64 },
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
