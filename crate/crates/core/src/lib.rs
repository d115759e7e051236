//! Diagonalization of Hermitian matrices by simulated projective measurements
//! on a single spin.
//!
//! A Hermitian `N x N` matrix is expanded in the multipole operators of a spin
//! `s = (N - 1) / 2`, turned into an observable, and measured repeatedly on the
//! maximally mixed state. Each measurement returns one eigenvalue; eigenvectors
//! follow from null spaces or from tomography of the post-measurement states.

pub mod apparatus;
pub mod cli;
pub mod error;
pub mod hmat;
pub mod linalg;
pub mod measurement;
pub mod multipole;
pub mod protocol;
pub mod rng;
pub mod spin;
pub mod tomography;

pub use error::{Error, Result};
