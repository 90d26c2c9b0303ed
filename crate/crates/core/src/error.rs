use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coefficient alpha2 = {alpha2:e} at t = {t} is at or below the positivity floor")]
    CoefficientSingular { t: f64, alpha2: f64 },

    #[error("non-finite state at t = {t}")]
    NonfiniteState { t: f64 },

    #[error("required step {h:e} at t = {t} is below h_min")]
    StepUnderflow { t: f64, h: f64 },

    #[error("unsupported forcing source: {0}")]
    UnsupportedSource(&'static str),

    #[error("reference invariant value is zero")]
    ZeroReference,

    #[error("Hill equation is not stable: |tr M| = {trace}")]
    UnstableHill { trace: f64 },

    #[error("envelope left [1e-6, 1e6]: w = {w:e} at t = {t}")]
    EnvelopeBlowup { t: f64, w: f64 },

    #[error("t = {t} lies outside the sampled range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable snake_case identifier used in run summaries.
    pub fn name(&self) -> &'static str {
        match self {
            Error::CoefficientSingular { .. } => "coefficient_singular",
            Error::NonfiniteState { .. } => "nonfinite_state",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::UnsupportedSource(_) => "unsupported_source",
            Error::ZeroReference => "zero_reference",
            Error::UnstableHill { .. } => "unstable_hill",
            Error::EnvelopeBlowup { .. } => "envelope_blowup",
            Error::OutOfRange { .. } => "out_of_range",
            Error::InvalidParameter(_) => "invalid_parameter",
        }
    }

    /// True for failures caused by the numerics rather than by the input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_) | Error::UnsupportedSource(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
