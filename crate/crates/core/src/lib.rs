//! Numerical laboratory for growth processes with reset.
//!
//! The object of study is a continuous-time Markov chain on the nonnegative
//! integers that either grows by one step (rate μ_n) or resets to the ground
//! state (rate γ_n). Despite the innocuous look of its master equation, the
//! interplay between growth and reset produces delicate behaviour: the
//! stationary candidate obtained by solving the balance equations can leak
//! probability through "infinity" and fail to be stationary at all, and the
//! approach to equilibrium can be made to pause arbitrarily often and
//! arbitrarily late by a suitable choice of initial condition.
//!
//! The crate is organized around that story:
//!
//! - [`rates`]: closed-form and tabulated rate families, with tail
//!   classification of the reset-to-growth ratio.
//! - [`stationary`]: the product-form candidate, the reset-weight sum S_0,
//!   boundary flux, and normalization.
//! - [`poly`]: real-root isolation used by the transient analysis.
//! - [`transient`]: closed-form relaxation for constant and linearly growing
//!   rates, and the polynomials whose roots are the stationary points of the
//!   deviation from equilibrium.
//! - [`adversarial`]: constructs initial data whose distance to equilibrium
//!   has any prescribed number of late stationary points, then verifies it.
//! - [`evolution`]: truncated master-equation integration with exact mass
//!   accounting, for everything without a closed form.

pub mod adversarial;
pub mod error;
pub mod evolution;
pub mod numeric;
pub mod poly;
pub mod rates;
pub mod stationary;
pub mod transient;

pub use error::{
    AdversarialError, EvolveError, PolyError, RateError, StationaryError, TransientError,
};
pub use rates::{ExtensionPolicy, RateFamily, RateSequence, TailClass};
pub use stationary::{
    BoundaryEstimate, Normalizability, S0Classification, S0Result, StationaryResult,
};
