//! Repeated global projective measurement on the periodic transverse-field
//! Ising chain.
//!
//! The chain starts with every spin up and is alternately evolved for a time
//! `tau` and asked "are all spins up?". The probability of never hearing
//! "yes" in the first `n` rounds is the survival probability `R_n`.
//!
//! Two independent engines compute `R_n`:
//!
//! * [`protocol`]: an exact state vector propagated with a Chebyshev
//!   expansion ([`propagator`]), usable up to roughly 22 sites. It also feeds
//!   the entanglement observables in [`entanglement`].
//! * [`freefermion`]: the closed-form return amplitudes of the fermionized
//!   chain plus a coefficient recursion, usable for chains of hundreds of
//!   sites.
//!
//! [`analysis`] turns the raw series into plateau heights, derivatives,
//! transition points and scaling collapses, and [`sweep`] drives parameter
//! scans over either engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod entanglement;
pub mod error;
pub mod freefermion;
pub mod linalg;
pub mod model;
pub mod propagator;
pub mod protocol;
pub mod summation;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
pub use model::{ModelParams, PureState};
pub use num_complex::Complex64;
