use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its invariant.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("no time in the drive cycle places the line inside the filter window")]
    EmptyGate,

    #[error("the filter window is open during {count} disjoint intervals of the cycle")]
    MultipleGates { count: usize },

    #[error("t2 = {t2} ps exceeds the lifetime limit 2*t1 = {limit} ps")]
    Domain { t2: f64, limit: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("histogram covers +/-{covered} ps but +/-{required} ps is required")]
    InsufficientSpan { covered: f64, required: f64 },

    #[error("outer peaks of the histogram are empty")]
    DegenerateHistogram,

    #[error("baseline ({baseline} per window) exceeds the outer-peak signal")]
    BaselineExceedsSignal { baseline: f64 },

    #[error("unrecognized result file: {0}")]
    UnrecognizedResult(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}
