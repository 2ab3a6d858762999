//! Exact-arithmetic laboratory for a smooth flow on the 3-torus whose rotation
//! vector exists as a time average but whose deviation from linear drift is
//! unbounded.
//!
//! The crate is layered bottom-up: [`precision`] (exact rationals, binary
//! floats, turn-based trigonometry), [`liouville`] (the resonant chain),
//! [`field`] (the truncated vector field), [`flow`] (closed-form solution and
//! RK4 oracle), [`analysis`] (rotation, deviation and correlation
//! certificates) and [`cli`].

pub mod analysis;
pub mod cli;
pub mod error;
pub mod field;
pub mod flow;
pub mod liouville;
pub mod precision;

pub use error::{Error, Result};
