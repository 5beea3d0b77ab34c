use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spin magnitude must be a non-negative half-integer with 2S >= 1, got {0}")]
    InvalidSpin(f64),

    #[error("negative evolution time {0}")]
    NegativeTime(f64),

    #[error("kicked-top times are kick counts; {0} is not a non-negative integer")]
    NonIntegerKicks(f64),

    #[error("time sequence must be non-decreasing (entry {index}: {value} < {previous})")]
    DecreasingTimes {
        index: usize,
        value: f64,
        previous: f64,
    },

    #[error("operator lists have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("rotation angle must be finite, got {0}")]
    NonUnitary(f64),

    #[error("both normalisation correlators vanish; ratio is undefined")]
    ZeroDenominator,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("at least one trajectory is required")]
    NoTrajectories,

    #[error("state norm underflow ({0:e}) during trajectory evolution")]
    NormUnderflow(f64),

    #[error("master-equation oracle supports at most {max} atoms, got {got}")]
    TooManyAtoms { got: usize, max: usize },

    #[error("spin too large for this operation: 2S+1 = {got} exceeds {max}")]
    SpinTooLarge { got: usize, max: usize },

    #[error("Ehrenfest time requires a positive Lyapunov exponent, got {0}")]
    NonPositiveExponent(f64),

    #[error("state dimension {got} does not match operator dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("empty correlator series")]
    EmptySeries,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
