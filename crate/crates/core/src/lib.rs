//! Polar codes over the binary erasure channel, decoded by a successive
//! cancellation decoder whose processing elements may erase their output.
//!
//! The crate covers density evolution with faulty transfer maps
//! ([`transfer`], [`construction`]), an erasure-domain encoder and decoder
//! ([`codec`]), Monte Carlo estimation ([`montecarlo`]) and the analytic
//! sweeps behind the figures ([`analysis`]). [`cli`] is the command-line
//! front end.

pub mod analysis;
pub mod cli;
pub mod codec;
pub mod construction;
mod error;
pub mod montecarlo;
pub mod transfer;

pub use error::{Error, Result};
pub use transfer::{Correlation, FaultSpec, Probability};
