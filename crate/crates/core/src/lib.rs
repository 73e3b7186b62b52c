//! Deterministic identification over discrete-time Poisson channels with
//! inter-symbol interference.
//!
//! The crate is organised around the pieces of the problem:
//!
//! * [`channel`]: the DTPC-ISI law, its exact likelihood and a seeded sampler.
//! * [`measures`]: L1 / total-variation / Bhattacharyya distances and Poisson
//!   entropies.
//! * [`di_code`]: √-intensity geometry, greedy codebook packing, a threshold
//!   identifier and Monte Carlo Type I/II estimation.
//! * [`dif_protocol`]: the three-phase identification-with-feedback protocol
//!   (pilot, typical-set filter + hashing, inner transmission code).
//! * [`bounds`]: closed-form capacity bounds and the finite-n converse.
//! * [`harness`]: experiment configs, orchestration and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod di_code;
pub mod dif_protocol;
mod error;
pub mod harness;
pub mod measures;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
