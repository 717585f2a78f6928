use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad Q-matrix: {0}")]
    BadQMatrix(String),

    #[error("reaction graph is not strongly connected")]
    NotConnected,

    #[error("detailed balance violated: max |w_ij - w_ji| = {residual:e}")]
    NotDetailedBalanced { residual: f64 },

    #[error("invalid simplex state: {0}")]
    InvalidState(String),

    #[error("lattice has {size} states, limit is {limit}")]
    LatticeTooLarge { size: u128, limit: u128 },

    #[error("unstable time step: dt = {dt:e} exceeds limit {limit:e}")]
    UnstableTimestep { dt: f64, limit: f64 },

    #[error("state is on the simplex boundary: {0}")]
    BoundarySingular(String),

    #[error("iterate left the simplex at t = {t}")]
    StepLeftSimplex { t: f64 },

    #[error("step size reduction exhausted at t = {t}")]
    StepRejected { t: f64 },

    #[error("eigenvalue {value:e} is numerically zero")]
    NearSingular { value: f64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("non-integrable theta profile: {0}")]
    NonIntegrableTheta(String),

    #[error("series truncated at {terms} terms for t = {t:e}")]
    TruncationWarning { t: f64, terms: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Variant name, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BadQMatrix(_) => "BadQMatrix",
            Error::NotConnected => "NotConnected",
            Error::NotDetailedBalanced { .. } => "NotDetailedBalanced",
            Error::InvalidState(_) => "InvalidState",
            Error::LatticeTooLarge { .. } => "LatticeTooLarge",
            Error::UnstableTimestep { .. } => "UnstableTimestep",
            Error::BoundarySingular(_) => "BoundarySingular",
            Error::StepLeftSimplex { .. } => "StepLeftSimplex",
            Error::StepRejected { .. } => "StepRejected",
            Error::NearSingular { .. } => "NearSingular",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::NonIntegrableTheta(_) => "NonIntegrableTheta",
            Error::TruncationWarning { .. } => "TruncationWarning",
            Error::Domain(_) => "Domain",
            Error::SupportMismatch(_) => "SupportMismatch",
            Error::Unsupported(_) => "Unsupported",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }

    /// True for errors that come from user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::BadQMatrix(_)
                | Error::InvalidState(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
