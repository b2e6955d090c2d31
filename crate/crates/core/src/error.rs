use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vector field vanishes at the base point (|X| = {0:.3e})")]
    Singularity(f64),
    #[error("integrator failed: {0}")]
    Integrator(String),
    #[error("QR step produced a degenerate diagonal entry {0:.3e}")]
    DegenerateQr(f64),
    #[error("horizon too short: stderr {stderr:.3e} exceeds smallest exponent gap {gap:.3e}")]
    HorizonTooShort { stderr: f64, gap: f64 },
    #[error("restriction to the central block is not invertible")]
    NonInvertibleRestriction,
    #[error("central block could not be resolved: {0}")]
    CentralBlockUnresolved(String),
    #[error("unstable direction unresolved at this point")]
    UnstableDirectionUnresolved,
    #[error("Moser residual {residual:.3e} above tolerance {tol:.3e}")]
    MoserResidual { residual: f64, tol: f64 },
    #[error("Poisson solve failed: {0}")]
    Poisson(String),
    #[error("chart inversion failed: {0}")]
    ChartInversion(String),
    #[error("flowbox is not injective at radius {0}")]
    NotInjective(f64),
    #[error("condition ({name}) failed: {detail}")]
    ConditionFailed { name: String, detail: String },
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
