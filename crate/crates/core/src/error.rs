use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state dimension {got} does not match system dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step size underflow at t = {time:e} s (h = {step:e} s)")]
    StepUnderflow { time: f64, step: f64 },

    #[error("ground-state phase undefined: population {0:e} below 1e-12")]
    UndefinedPhase(f64),

    #[error("propagation failed in channel {channel}: {source}")]
    Channel {
        channel: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate fit: all abscissae identical")]
    DegenerateFit,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
