//! Sparse Bayesian generative modeling of wireless channel parameters.
//!
//! Channels are represented as `h = D s` over a physical grid (angles for
//! SIMO, delay-Doppler for OFDM). A Gaussian mixture with diagonal
//! covariances over `s` is learned from noisy compressed observations
//! `y = A h + n` by EM, and new parameters are drawn from it and rendered
//! under any system configuration over the same grid.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dictionary;
pub mod error;
pub mod generation;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod quadrature;
pub mod random;
pub mod sbgm;
pub mod scenario;
pub mod selfcheck;

pub use error::{Error, Result};
