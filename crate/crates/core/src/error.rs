use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("eta is singular (min eigenvalue {min_eigenvalue:.3e})")]
    SingularEta { min_eigenvalue: f64 },

    #[error("matrix is singular (|det| = {det:.3e})")]
    SingularMatrix { det: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },

    #[error("branch continuation is ambiguous at theta = {theta} (refine the step)")]
    BranchAmbiguity { theta: f64 },

    #[error("gauge is infeasible: lambda_min(M) = {lambda_min:.3e} at t = {t}")]
    InfeasibleGauge { t: f64, lambda_min: f64 },

    #[error("{which} is not Hermitian (asymmetry {defect:.3e})")]
    HermiticityViolation { which: &'static str, defect: f64 },

    #[error("carrier frequency mismatch on channel {channel}: {detail}")]
    FrequencyMismatch { channel: u8, detail: String },

    #[error("carrier/drive separation too small: ratio {ratio:.2} < {required}")]
    SeparationTooSmall { ratio: f64, required: f64 },

    #[error("PL rates are degenerate: {detail}")]
    DegeneratePl { detail: String },

    #[error("least-squares design matrix is rank deficient (condition {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("state has vanishing trace {trace:.3e}")]
    ZeroState { trace: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
