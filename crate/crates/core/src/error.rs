//! Error types shared across the crate.
//!
//! Each module has a dedicated error enum; cross-module failures are wrapped
//! via `#[from]` conversions so callers can use `?` freely.

use thiserror::Error;

/// Failures while constructing or evaluating rate sequences.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    /// A family parameter violated its positivity constraint.
    #[error("invalid rate parameter: {0}")]
    InvalidParameter(String),
    /// A table family with `error` extension policy was evaluated past its end.
    #[error("table rate index {index} out of range (table holds {len} values)")]
    IndexOutOfRange { index: usize, len: usize },
    /// A table family holds no values.
    #[error("table rate family must hold at least one value")]
    EmptyTable,
}

/// Failures in stationary-law computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error(transparent)]
    Rate(#[from] RateError),
    /// The iterated candidate overflowed f64 range (rates shrink too fast).
    #[error("stationary candidate overflowed at index {index}")]
    Overflow { index: usize },
    /// The candidate has infinite total mass and cannot be normalized.
    #[error("candidate is not normalizable: {0}")]
    NotNormalizable(String),
    /// Neither the summability test nor the ratio test concluded.
    #[error("normalizability undetermined: {0}")]
    Undetermined(String),
}

/// Failures in closed-form transient computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransientError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    /// Two total rates coincide, so the modal expansion denominators vanish.
    #[error("total rates at indices {i} and {j} coincide; modal expansion undefined")]
    RepeatedLambda { i: usize, j: usize },
    /// The requested state index exceeds the stored expansion.
    #[error("state index {index} exceeds expansion order {order}")]
    IndexBeyondOrder { index: usize, order: usize },
    /// Construction input violated a precondition.
    #[error("invalid transient input: {0}")]
    InvalidInput(String),
}

/// Failures in polynomial root isolation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    /// The identically-zero polynomial has no meaningful root set.
    #[error("degenerate (identically zero) polynomial")]
    Degenerate,
}

/// Failures while constructing or verifying adversarial initial data.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversarialError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error(transparent)]
    Transient(#[from] TransientError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    /// The request violated a structural precondition.
    #[error("invalid adversarial spec: {0}")]
    InvalidSpec(String),
    /// The feasibility margin shrank below representable size.
    #[error("feasibility scaling underflowed while shrinking the perturbation")]
    FeasibilityUnderflow,
    /// Verification failed after all retry stretches; lists the failed checks.
    #[error("adversarial verification failed: {0}")]
    VerificationFailed(String),
}

/// Failures during truncated time evolution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Rate(#[from] RateError),
    /// Variant parameters out of range, or variant incompatible with the rates.
    #[error("invalid model variant: {0}")]
    InvalidVariant(String),
    /// The adaptive step shrank below resolvable size (stiffness overload).
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    /// An initial state failed validation.
    #[error("invalid state: {0}")]
    InvalidState(String),
}
