use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("index ({row}, {col}) out of range for n = {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver did not converge (matrix seed {seed:#018x}, replica {replica}, eigenvalue {index})")]
    NoConvergence { seed: u64, replica: u64, index: usize },

    #[error("negative limiting variance {0:e}; moment inputs are inconsistent")]
    NegativeVariance(f64),

    #[error("sample too small: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("tabulated test function grid [{lo}, {hi}] does not cover the support [-{edge}, {edge}]")]
    Coverage { lo: f64, hi: f64, edge: f64 },

    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Validation failures as opposed to numerical or I/O failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDistribution(_)
                | Error::InvalidEnsemble(_)
                | Error::Unsupported(_)
                | Error::IndexOutOfRange { .. }
                | Error::Contract(_)
                | Error::Domain(_)
                | Error::InsufficientSample { .. }
                | Error::GridMismatch(_)
                | Error::Coverage { .. }
                | Error::Provenance(_)
                | Error::Schema { .. }
                | Error::Json(_)
        )
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::NegativeVariance(_))
    }
}
