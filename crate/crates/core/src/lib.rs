//! Predictor-corrector Euler-Maruyama schemes for stochastic differential
//! equations with Markovian switching.
//!
//! The crate simulates the regime chain, steps the `(theta, eta)` family of
//! schemes, estimates strong errors against the exact solution of linear
//! models and maps mean-square stability regions.

pub mod analysis;
pub mod cli;
pub mod ctmc;
pub mod error;
pub mod models;
pub mod schemes;
pub mod simulate;

pub use error::{Error, Result};
