//! Numerical schemes for the transport equation
//! `d/dt mu + div(v[mu] mu) = 0` with a velocity that depends on the whole
//! measure, together with an exact discrete Wasserstein engine, closed-form
//! a-priori bounds, and executable counterexamples.

pub mod bounds;
pub mod counterexample;
pub mod error;
pub mod harness;
pub mod measure;
pub mod schemes;
pub mod transport;
pub mod velocity;

pub use error::{Error, Result};
