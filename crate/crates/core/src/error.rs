use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "SQUID inductance diverges at flux {flux} (symmetric junctions at a half-integer flux)"
    )]
    DivergentInductance { flux: f64 },

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid waveform spec: {0}")]
    InvalidSpec(String),

    #[error("integration step too coarse: {0}")]
    StepTooCoarse(String),

    #[error("pulse holds {photons:e} photons, below the {threshold:e} analysis threshold")]
    BelowThreshold { photons: f64, threshold: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("carrier mismatch of {delta:e} rad/s exceeds tolerance {tolerance:e} rad/s")]
    CarrierMismatch { delta: f64, tolerance: f64 },

    #[error("target unreachable: {0}")]
    Unreachable(String),

    #[error("spectrum has no sidebands")]
    NoSidebands,

    #[error("trace too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("data outside candidate bracket: {0}")]
    OutOfBracket(String),

    #[error("g/e temporal modes are degenerate (overlap angle {theta} rad)")]
    DegenerateModes { theta: f64 },

    #[error("background magnitude vanishes at point {index}")]
    ZeroBackground { index: usize },

    #[error("Fock truncation too small: {leaked:e} population in the top levels")]
    TruncationTooSmall { leaked: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}
