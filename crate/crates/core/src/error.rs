use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Outcomes that are reportable rather than fatal
/// (a drift certificate that does not certify, a divergent expansion)
/// are carried as status fields on the result types.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation defect {defect:.3e} at row {row} exceeds the allowed {limit:.3e}")]
    Truncation { row: usize, defect: f64, limit: f64 },

    #[error("noise mass outside the domain is {defect:.3e}, above tau_trunc = {limit:.3e}")]
    NoiseTruncation { defect: f64, limit: f64 },

    #[error("invariant measure is not unique: subdominant modulus {modulus:.12}")]
    NonUnique { modulus: f64 },

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("z = {re}+{im}i is too close to the spectrum (residual {residual:.3e})")]
    SpectralProximity { re: f64, im: f64, residual: f64 },

    #[error("contour crosses the spectrum: {0}")]
    Contour(String),

    #[error("contour projection is not a rank-one idempotent (defect {defect:.3e})")]
    SeparationFailure { defect: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("noise model not eligible: {0}")]
    Ineligible(String),

    #[error("at eps = {eps}: {source}")]
    AtEps {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_eps(eps: f64, source: Error) -> Self {
        Error::AtEps {
            eps,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
