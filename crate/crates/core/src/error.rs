use thiserror::Error;

/// Errors raised by the simulator, the estimators and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("delay line protocol violation at step {step}: {reason}")]
    ProtocolViolation { step: usize, reason: &'static str },

    #[error("phase estimate undefined: {0} vanishes")]
    UndefinedEstimate(&'static str),

    #[error("time-dependent epsilon undefined at v = {v}")]
    EpsilonEndpoint { v: f64 },

    #[error("heterodyne feedback carries no intermediate phase estimate")]
    NoIntermediateEstimate,

    #[error("squeezed-state mapping is singular for |B| = {abs_b}")]
    SingularMapping { abs_b: f64 },

    #[error("delay limit requires 0 < tau <= 1 (got {tau}); use the no-delay theory for tau = 0")]
    NoDelayTheory { tau: f64 },

    #[error("quadrature did not converge: estimated error {achieved_error:e} on value {value:e}")]
    QuadratureAccuracy { value: f64, achieved_error: f64 },

    #[error("slope fit needs at least 3 usable points, got {usable}")]
    InsufficientRange { usable: usize },

    #[error("phase variance unmeasurable: mean resultant length is zero")]
    Unmeasurable,

    #[error("|B(1)| = {abs_b} exceeds ceiling {ceiling} in trajectory {trajectory}")]
    BCeilingViolated { trajectory: u64, abs_b: f64, ceiling: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
