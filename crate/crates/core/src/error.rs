use thiserror::Error;

/// Errors raised by the laboratory's constructors and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("invalid coefficient table: {0}")]
    InvalidTable(String),

    #[error("coefficient violates positivity: a({x}) = {value}")]
    NonPositiveCoefficient { x: f64, value: f64 },

    #[error("integrand not integrable on [{lo}, {hi}]")]
    NotIntegrable { lo: f64, hi: f64 },

    #[error("bridge overshoot: |psi| reaches {bridge_max:.3e} against branch scale {branch_scale:.3e}")]
    BridgeOvershoot { bridge_max: f64, branch_scale: f64 },

    #[error("singular endpoint: t = {t} is not inside (0, {horizon})")]
    SingularEndpoint { t: f64, horizon: f64 },

    #[error("non-SPD step matrix (pivot {pivot:.3e} at row {row})")]
    NonSpdStep { row: usize, pivot: f64 },

    #[error("boundary regime {regime} is inconsistent with coefficient regime {coefficient}")]
    RegimeMismatch { regime: String, coefficient: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("penalty underflow: epsilon {epsilon:.3e} is below the resolvable scale {scale:.3e}")]
    PenaltyUnderflow { epsilon: f64, scale: f64 },

    #[error("inconsistent energy report: rhs = 0 while lhs = {lhs:.3e}")]
    EnergyInconsistency { lhs: f64 },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(err: std::io::Error) -> Self {
        LabError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
