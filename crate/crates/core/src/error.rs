use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("array model construction failed: {0}")]
    Construction(String),

    /// A precondition of the called operation does not hold for the given model
    /// or input (e.g. an orthogonal-only routine fed a fat steering matrix).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver did not converge at tau = {tau:.6e} (active set {active:?}): {detail}")]
    SolverFailure {
        tau: f64,
        active: Vec<usize>,
        detail: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("noise variance estimation failed: {0}")]
    Estimation(String),

    #[error("rank-deficient active columns: {0}")]
    RankDeficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Solver and numeric failures map to a different CLI exit status than
    /// configuration or input errors.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure { .. }
                | Error::Numeric(_)
                | Error::Estimation(_)
                | Error::RankDeficient(_)
                | Error::Construction(_)
        )
    }
}
