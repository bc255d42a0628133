//! Sequential Bayesian inference for k-parametric dynamic generalized linear
//! models (DGLMs).
//!
//! Observations follow a k-parametric exponential family whose natural
//! parameters are driven by latent Gaussian states through a link:
//! λ_t = F'_t θ_t, with θ_t = G_t θ_{t-1} + ω_t and ω_t ~ N(0, W_t).
//! Each filtering step reconciles the Gaussian prior on λ_t with the
//! family's conjugate prior by moment matching (the KL projection onto the
//! conjugate family), performs the exact conjugate Bayes update, projects
//! the conjugate posterior back to Gaussian moments, and propagates the
//! information to the states by a linear Bayes step. Smoothing and
//! multi-step forecasting operate on the stored filter trajectory.
//!
//! The crate is `no_std` (with `alloc`); IO, CSV handling and the CLI live
//! in the companion `kdglm-cli` crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` is the deliberate NaN-rejecting form of domain guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod family;
pub mod filter;
pub mod linalg;
pub mod oracle;
pub mod sim;
pub mod smooth;
pub mod special;
pub mod state_space;

pub use error::Error;

/// Re-exported so downstream code builds vectors and matrices against
/// the exact version this crate links.
pub use nalgebra;

/// Result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
