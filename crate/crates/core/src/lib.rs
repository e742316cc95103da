//! Decomposes a bounded function on the hypercube `[-1,1]^n` into a
//! clipped affine network of bounded size plus a residual that no small
//! network correlates with.
//!
//! * [`netcore`]: clipped affine units and networks, padding, parallel
//!   composition.
//! * [`measure`]: quadrature realizations of the uniform measure, inner
//!   products and distances.
//! * [`adversary`]: multi-start search for dictionary elements that
//!   correlate with a given function.
//! * [`decomposer`]: the greedy energy-increment decomposition and its
//!   re-verification.
//! * [`zoo`], [`config`], [`runner`]: named targets, run configuration and
//!   the batch driver behind the CLI.

pub mod adversary;
pub mod config;
pub mod decomposer;
pub mod error;
pub mod measure;
pub mod netcore;
pub mod runner;
pub mod seeds;
pub mod zoo;

pub use error::{Error, Result};
