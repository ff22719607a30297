use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// The kernel rescaled by epsilon is too narrow for the source grid.
    #[error("resolution error: epsilon = {epsilon} is below {min_steps} grid steps (dt = {dt})")]
    Resolution {
        epsilon: f64,
        dt: f64,
        min_steps: f64,
    },

    #[error("coverage error: need [{need_start}, {need_end}] but source covers [{have_start}, {have_end}]")]
    Coverage {
        need_start: f64,
        need_end: f64,
        have_start: f64,
        have_end: f64,
    },

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("length error: {0}")]
    Length(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("degenerate estimator: {0}")]
    Degenerate(String),

    #[error("unsupported kernel `{kernel}`: {reason}")]
    UnsupportedKernel { kernel: String, reason: String },

    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
