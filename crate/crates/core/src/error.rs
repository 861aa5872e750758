use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange { what: &'static str, index: i64, limit: i64 },

    #[error("{what} is numerically singular (condition estimate {condition:.3e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("operator invariant `{name}` violated: residual {residual:.3e} exceeds {tolerance:.1e}")]
    InvariantViolation {
        name: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("channel bin {bin} is in a deep fade (|H| = {magnitude:.3e})")]
    DeepFade { bin: usize, magnitude: f64 },

    #[error("path delay of {delay} samples does not fit in a block of {len}")]
    DelayTooLong { delay: usize, len: usize },

    #[error("stream of {len} samples is shorter than the analysis window ({window})")]
    StreamTooShort { len: usize, window: usize },

    #[error("closed-form SIR needs a unitary transmit matrix (beta = 0), got beta = {beta}")]
    ClosedFormNeedsUnitary { beta: f64 },

    #[error("smooth-signal power is zero; SIR undefined")]
    ZeroSmoothPower,

    #[error("{0}")]
    OutOfRange(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed matrix file: {0}")]
    MatrixFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
