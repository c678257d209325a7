//! Channel estimation for line-of-sight MIMO links that use first-order,
//! 1-bit spatial sigma-delta converters at both ends.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantizer`] simulates the spatial sigma-delta converter and exposes the
//!   deterministic input/output relation of its quantization noise.
//! * [`channel`] builds uniform-linear-array steering vectors, the rank-1
//!   line-of-sight channel and the received signal.
//! * [`pilots`] predistorts Hadamard pilots so that the transmit converter
//!   emits an exactly orthogonal sequence.
//! * [`estimator`] prewhitens, despreads and runs MUSIC on both array sides,
//!   followed by a least-squares path gain.
//! * [`experiments`] hosts the Monte Carlo harness (NMSE sweeps, the
//!   input/noise correlation study and the noise-shaping check).
//! * [`config`], [`output`], [`verify`] and [`cli`] drive the `sdmimo` binary.
//!
//! Matrices are `nalgebra` dynamic matrices of [`Complex64`].

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
mod linalg;
pub mod output;
pub mod pilots;
pub mod quantizer;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Largest modulus among the given entries; 0 for an empty input.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    entries.into_iter().fold(0.0, |m, z| m.max(z.norm()))
}
