//! Fluid-element simultaneously transmitting and reflecting surfaces:
//! spatially correlated channel synthesis, sum-rate evaluation under an
//! energy split, swarm-based element placement and a fixed-layout baseline.

// NaN-rejecting range checks read as `!(x > 0.0)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pso;
pub mod rate;

pub use error::{Error, Result};
