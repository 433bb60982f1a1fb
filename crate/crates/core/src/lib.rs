//! Desk-scale simulation of Q-function homodyne (heterodyne) data on
//! photon-subtracted squeezed and cat states, the two-copy virtual
//! beam-splitter growing protocol applied to that data, and maximum-likelihood
//! reconstruction of the grown states.
//!
//! Phase-space convention: α = x + iy, vacuum Q-samples have variance 1/2 per
//! axis and the vacuum Wigner function has variance 1/4 per axis.

pub mod breeding;
pub mod error;
pub mod fock;
pub mod io;
pub mod qhd;
pub mod quasiprob;
pub mod stats;
pub mod tomography;

pub use error::{Error, Result};
